#include "opt2rl/exact.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace opt2rl {

ExactResult brute_force(const Instance& inst) {
  const int n = inst.n();
  if (n > 10)
    throw std::invalid_argument("brute_force: n=" + std::to_string(n) + " exceeds cap 10");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_order = perm;
  double best = tour_cost(inst, perm);
  // Node 0 stays first; every tour class is still visited.
  while (std::next_permutation(perm.begin() + 1, perm.end())) {
    double c = tour_cost(inst, perm);
    if (c < best) {
      best = c;
      best_order = perm;
    }
  }
  ExactResult res;
  res.tour = make_tour(inst, std::move(best_order));
  res.length = res.tour.length;
  return res;
}

ExactResult held_karp(const Instance& inst, int max_nodes) {
  const int n = inst.n();
  if (n > max_nodes)
    throw std::invalid_argument("held_karp: n=" + std::to_string(n) + " exceeds cap " +
                                std::to_string(max_nodes));
  const int m = n - 1;  // nodes 1..n-1; node 0 is the fixed start
  const std::size_t nmask = std::size_t{1} << m;
  const double inf = std::numeric_limits<double>::infinity();

  // dp[mask*m + (j-1)]: cheapest path 0 -> ... -> j visiting exactly the
  // nodes of `mask`. par stores the predecessor for reconstruction.
  std::vector<double> dp(nmask * static_cast<std::size_t>(m), inf);
  std::vector<std::uint8_t> par(nmask * static_cast<std::size_t>(m), 255);

  const Mat& d = inst.dist;
  for (int j = 1; j <= m; ++j)
    dp[(std::size_t{1} << (j - 1)) * m + (j - 1)] = d(0, j);

  for (std::size_t mask = 1; mask < nmask; ++mask) {
    const std::size_t row = mask * static_cast<std::size_t>(m);
    for (std::size_t bits = mask; bits != 0;) {
      const int jb = std::countr_zero(bits);
      bits &= bits - 1;
      const std::size_t jbit = std::size_t{1} << jb;
      if (mask == jbit) continue;  // handled by the init above
      const std::size_t pmask = mask ^ jbit;
      const std::size_t prow = pmask * static_cast<std::size_t>(m);
      const int j = jb + 1;
      double best = inf;
      int best_k = -1;
      for (std::size_t kbits = pmask; kbits != 0;) {
        const int kb = std::countr_zero(kbits);
        kbits &= kbits - 1;
        const double cand = dp[prow + kb] + d(kb + 1, j);
        if (cand < best) {
          best = cand;
          best_k = kb;
        }
      }
      dp[row + jb] = best;
      par[row + jb] = static_cast<std::uint8_t>(best_k);
    }
  }

  const std::size_t full = nmask - 1;
  double best = inf;
  int best_j = -1;
  for (int jb = 0; jb < m; ++jb) {
    const double cand = dp[full * m + jb] + d(jb + 1, 0);
    if (cand < best) {
      best = cand;
      best_j = jb;
    }
  }

  std::vector<int> order(n);
  std::size_t mask = full;
  int jb = best_j;
  for (int pos = n - 1; pos >= 1; --pos) {
    order[pos] = jb + 1;
    const int pb = par[mask * m + jb];
    mask ^= std::size_t{1} << jb;
    jb = pb;
  }
  order[0] = 0;

  ExactResult res;
  res.tour = make_tour(inst, std::move(order));
  res.length = best;
  if (std::abs(res.tour.length - best) > 1e-9)
    throw std::logic_error("held_karp: reconstructed tour does not match DP value");
  return res;
}

double optimality_gap(double cost, double optimal) {
  if (!(optimal > 0.0)) throw std::invalid_argument("optimality_gap: optimal must be positive");
  if (cost < optimal - 1e-9)
    throw std::logic_error("optimality_gap: cost " + std::to_string(cost) +
                           " undercuts optimum " + std::to_string(optimal) +
                           " (oracle inconsistency)");
  return std::max(0.0, (cost / optimal - 1.0) * 100.0);
}

}  // namespace opt2rl
