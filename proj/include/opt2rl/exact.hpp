#pragma once

#include "opt2rl/tsp.hpp"

namespace opt2rl {

struct ExactResult {
  Tour tour;
  double length = 0.0;
};

// Exhaustive search over all (n-1)! node orders with node 0 fixed first.
// Refuses n > 10.
ExactResult brute_force(const Instance& inst);

// Subset dynamic program; provably optimal. Memory is O(2^(n-1) * n),
// so instances above `max_nodes` (default 20) are refused.
ExactResult held_karp(const Instance& inst, int max_nodes = 20);

// (cost / optimal - 1) * 100, clamped at 0 for sub-tolerance noise.
// Throws if cost undercuts the optimum by more than 1e-9.
double optimality_gap(double cost, double optimal);

}  // namespace opt2rl
