#pragma once

#include <cstdint>
#include <vector>

#include "opt2rl/tsp.hpp"

namespace opt2rl {

enum class PivotRule { FirstImprovement, BestImprovement };

struct LocalSearchConfig {
  PivotRule rule = PivotRule::BestImprovement;
  bool restarts = false;
  int max_steps = 1000;  // accepted moves + restarts
  std::uint64_t rng_seed = 0;
};

struct LocalSearchResult {
  Tour best;                  // best tour ever visited
  int steps_used = 0;
  std::vector<double> trace;  // current-tour length after each step
};

// Construction heuristics. Each grows a partial tour by inserting the
// selected node at the position of cheapest cost increase.
Tour nearest_insertion(const Instance& inst);
Tour farthest_insertion(const Instance& inst);
Tour random_insertion(const Instance& inst, std::uint64_t seed);

// Classical 2-opt descent with FI/BI pivot rules. Accepted moves strictly
// decrease the current length; at a local optimum the search either stops
// or restarts from a fresh uniformly random tour.
LocalSearchResult local_search_2opt(const Instance& inst, const Tour& start,
                                    const LocalSearchConfig& config);

}  // namespace opt2rl
