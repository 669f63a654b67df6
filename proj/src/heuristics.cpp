#include "opt2rl/heuristics.hpp"

#include <limits>
#include <stdexcept>

#include "opt2rl/rng.hpp"

namespace opt2rl {

namespace {

constexpr double kImproveEps = 1e-9;

// Inserts node k into `order` at the position of minimum cost increase.
void insert_cheapest(const Mat& d, std::vector<int>& order, int k) {
  const int len = static_cast<int>(order.size());
  double best_delta = std::numeric_limits<double>::infinity();
  int best_pos = 0;
  for (int p = 0; p < len; ++p) {
    const int a = order[p];
    const int b = order[(p + 1) % len];
    const double delta = d(a, k) + d(k, b) - d(a, b);
    if (delta < best_delta) {
      best_delta = delta;
      best_pos = p + 1;
    }
  }
  order.insert(order.begin() + best_pos, k);
}

// min over tour nodes of d(node, tour node)
double dist_to_tour(const Mat& d, const std::vector<int>& order, int k) {
  double best = std::numeric_limits<double>::infinity();
  for (int v : order) best = std::min(best, d(k, v));
  return best;
}

Tour insertion(const Instance& inst, bool farthest) {
  const int n = inst.n();
  const Mat& d = inst.dist;
  // Seed tour: the mutually nearest (resp. farthest) pair of nodes.
  int sa = 0, sb = 1;
  double sd = d(0, 1);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (farthest ? d(i, j) > sd : d(i, j) < sd) {
        sd = d(i, j);
        sa = i;
        sb = j;
      }
    }
  std::vector<int> order = {sa, sb};
  std::vector<char> in_tour(n, 0);
  in_tour[sa] = in_tour[sb] = 1;
  for (int step = 2; step < n; ++step) {
    int pick = -1;
    double pick_d = farthest ? -1.0 : std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      if (in_tour[k]) continue;
      const double dk = dist_to_tour(d, order, k);
      if (farthest ? dk > pick_d : dk < pick_d) {
        pick_d = dk;
        pick = k;
      }
    }
    insert_cheapest(d, order, pick);
    in_tour[pick] = 1;
  }
  return make_tour(inst, std::move(order));
}

}  // namespace

Tour nearest_insertion(const Instance& inst) { return insertion(inst, false); }

Tour farthest_insertion(const Instance& inst) { return insertion(inst, true); }

Tour random_insertion(const Instance& inst, std::uint64_t seed) {
  const int n = inst.n();
  std::mt19937_64 rng(seed);
  std::vector<int> remaining(n);
  for (int i = 0; i < n; ++i) remaining[i] = i;
  // Start from one random node, then insert random nodes at cheapest cost.
  int first_idx = rand_below(rng, n);
  std::vector<int> order = {remaining[first_idx]};
  remaining.erase(remaining.begin() + first_idx);
  while (!remaining.empty()) {
    int idx = rand_below(rng, static_cast<int>(remaining.size()));
    int k = remaining[idx];
    remaining.erase(remaining.begin() + idx);
    if (order.size() == 1) {
      order.push_back(k);
    } else {
      insert_cheapest(inst.dist, order, k);
    }
  }
  return make_tour(inst, std::move(order));
}

LocalSearchResult local_search_2opt(const Instance& inst, const Tour& start,
                                    const LocalSearchConfig& config) {
  if (config.max_steps < 1) throw std::invalid_argument("local_search_2opt: max_steps must be >= 1");
  const int n = inst.n();
  const long total_moves = static_cast<long>(n) * (n - 1) / 2;
  std::mt19937_64 rng(config.rng_seed);

  Tour current = start;
  LocalSearchResult res;
  res.best = start;

  // First-improvement scan state (row-major over i<j, resumed after accepts).
  int fi_i = 0, fi_j = 1;
  auto advance = [&] {
    if (++fi_j >= n) {
      if (++fi_i >= n - 1) fi_i = 0;
      fi_j = fi_i + 1;
    }
  };

  while (res.steps_used < config.max_steps) {
    bool accepted = false;
    if (config.rule == PivotRule::BestImprovement) {
      double best_delta = -kImproveEps;
      Move best_move{-1, -1};
      for (int i = 0; i < n - 1; ++i)
        for (int j = i + 1; j < n; ++j) {
          const double delta = two_opt_delta(inst, current, Move{i, j});
          if (delta < best_delta) {  // strict: ties keep the lowest (i,j)
            best_delta = delta;
            best_move = Move{i, j};
          }
        }
      if (best_move.i >= 0) {
        current = apply_move(current, best_move, inst);
        accepted = true;
      }
    } else {
      for (long scanned = 0; scanned < total_moves; ++scanned) {
        const Move m{fi_i, fi_j};
        advance();
        if (two_opt_delta(inst, current, m) < -kImproveEps) {
          current = apply_move(current, m, inst);
          accepted = true;
          break;
        }
      }
    }

    if (accepted) {
      ++res.steps_used;
      res.trace.push_back(current.length);
      if (current.length < res.best.length) res.best = current;
      continue;
    }

    // Local optimum reached.
    if (!config.restarts) break;
    current = random_tour(inst, rng);
    fi_i = 0;
    fi_j = 1;
    ++res.steps_used;
    res.trace.push_back(current.length);
    if (current.length < res.best.length) res.best = current;
  }
  return res;
}

}  // namespace opt2rl
