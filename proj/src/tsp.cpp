#include "opt2rl/tsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "opt2rl/rng.hpp"

namespace opt2rl {

Mat pairwise_distances(const Eigen::Matrix2Xd& coords) {
  const int n = static_cast<int>(coords.cols());
  Mat d(n, n);
  for (int i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      double v = (coords.col(i) - coords.col(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Mat normalize_edges(const Mat& dist) {
  const int n = static_cast<int>(dist.rows());
  if (dist.cols() != n) throw std::invalid_argument("normalize_edges: matrix not square");
  for (int i = 0; i < n; ++i) {
    if (dist(i, i) != 0.0) throw std::invalid_argument("normalize_edges: nonzero diagonal");
    for (int j = i + 1; j < n; ++j)
      if (std::abs(dist(i, j) - dist(j, i)) > 1e-9)
        throw std::invalid_argument("normalize_edges: matrix not symmetric");
  }
  // Symmetric input makes row and column sums coincide; using one vector of
  // sums keeps the output exactly symmetric.
  Vec sums = dist.rowwise().sum();
  for (int i = 0; i < n; ++i) {
    if (!(sums(i) > 0.0))
      throw std::domain_error("normalize_edges: degenerate instance, zero row sum at node " +
                              std::to_string(i));
  }
  Mat out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = dist(i, j) / std::sqrt(sums(i) * sums(j));
  return out;
}

Instance make_instance(Eigen::Matrix2Xd coords) {
  const int n = static_cast<int>(coords.cols());
  if (n < kMinNodes)
    throw std::invalid_argument("make_instance: need at least " + std::to_string(kMinNodes) +
                                " nodes, got " + std::to_string(n));
  if (!coords.allFinite()) throw std::invalid_argument("make_instance: non-finite coordinate");
  Instance inst;
  inst.coords = std::move(coords);
  inst.dist = pairwise_distances(inst.coords);
  inst.norm_edges = normalize_edges(inst.dist);
  return inst;
}

double tour_cost(const Mat& dist, const std::vector<int>& order) {
  const int n = static_cast<int>(dist.rows());
  if (static_cast<int>(order.size()) != n)
    throw std::invalid_argument("tour_cost: order length " + std::to_string(order.size()) +
                                " does not match instance size " + std::to_string(n));
  double total = 0.0;
  for (int k = 0; k + 1 < n; ++k) total += dist(order[k], order[k + 1]);
  total += dist(order[n - 1], order[0]);
  return total;
}

double tour_cost(const Instance& inst, const std::vector<int>& order) {
  return tour_cost(inst.dist, order);
}

Tour make_tour(const Instance& inst, std::vector<int> order) {
  const int n = inst.n();
  if (static_cast<int>(order.size()) != n)
    throw std::invalid_argument("make_tour: order length does not match instance");
  std::vector<char> seen(order.size(), 0);
  for (int v : order) {
    if (v < 0 || v >= n || seen[v]) throw std::invalid_argument("make_tour: not a permutation");
    seen[v] = 1;
  }
  Tour t;
  t.order = std::move(order);
  t.length = tour_cost(inst, t.order);
  return t;
}

Tour random_tour(const Instance& inst, std::mt19937_64& rng) {
  std::vector<int> order(inst.n());
  std::iota(order.begin(), order.end(), 0);
  for (int i = inst.n() - 1; i > 0; --i) {
    int k = rand_below(rng, i + 1);
    std::swap(order[i], order[k]);
  }
  return make_tour(inst, std::move(order));
}

void check_move(const Move& m, int n) {
  if (m.i < 0 || m.j >= n || m.i >= m.j)
    throw std::invalid_argument("move (" + std::to_string(m.i) + "," + std::to_string(m.j) +
                                ") violates 0 <= i < j <= n-1 for n=" + std::to_string(n));
}

double two_opt_delta(const Instance& inst, const Tour& tour, const Move& m) {
  const int n = inst.n();
  check_move(m, n);
  if (m.i == 0 && m.j == n - 1) return 0.0;  // whole-tour reversal
  const auto& ord = tour.order;
  const int prev = ord[(m.i + n - 1) % n];
  const int pi = ord[m.i];
  const int pj = ord[m.j];
  const int next = ord[(m.j + 1) % n];
  const Mat& d = inst.dist;
  return d(prev, pj) + d(pi, next) - d(prev, pi) - d(pj, next);
}

Tour apply_move(const Tour& tour, const Move& m, const Instance& inst) {
  double delta = two_opt_delta(inst, tour, m);
  Tour out = tour;
  std::reverse(out.order.begin() + m.i, out.order.begin() + m.j + 1);
  out.length = tour.length + delta;
  return out;
}

}  // namespace opt2rl
