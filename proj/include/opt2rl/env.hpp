#pragma once

#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "opt2rl/tsp.hpp"

namespace opt2rl::rl {

// MDP state: the current tour S and the best tour S' seen so far in the run.
struct SearchState {
  Tour current;
  Tour best;
};

struct EnvConfig {
  int total_steps = 200;                    // step limit of one run
  int episode_length = 8;                   // T <= total_steps
  double gamma = 0.99;
  std::optional<double> reward_clip = 1.0;  // nullopt = unclipped
};

void validate(const EnvConfig& config);

// current = uniformly random permutation; best starts as its copy.
SearchState reset(const Instance& inst, std::mt19937_64& rng);

// Applies the move, updates the best-so-far, and pays the (clipped)
// improvement over the previous best as reward. Inputs are untouched.
std::pair<SearchState, double> step(const SearchState& state, const Move& move,
                                    const Instance& inst, const EnvConfig& config);

// Within-episode discounted returns, G_t = sum_{t'>=t} gamma^(t'-t) R_t'.
std::vector<double> compute_returns(const std::vector<double>& rewards, double gamma);

}  // namespace opt2rl::rl
