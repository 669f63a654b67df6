#include "opt2rl/env.hpp"

#include <algorithm>
#include <stdexcept>

namespace opt2rl::rl {

void validate(const EnvConfig& config) {
  if (config.total_steps < 1) throw std::invalid_argument("EnvConfig: total_steps must be >= 1");
  if (config.episode_length < 1 || config.episode_length > config.total_steps)
    throw std::invalid_argument("EnvConfig: need 1 <= episode_length <= total_steps");
  if (!(config.gamma > 0.0) || config.gamma > 1.0)
    throw std::invalid_argument("EnvConfig: gamma must be in (0,1]");
  if (config.reward_clip && !(*config.reward_clip > 0.0))
    throw std::invalid_argument("EnvConfig: reward_clip must be positive");
}

SearchState reset(const Instance& inst, std::mt19937_64& rng) {
  SearchState s;
  s.current = random_tour(inst, rng);
  s.best = s.current;
  return s;
}

std::pair<SearchState, double> step(const SearchState& state, const Move& move,
                                    const Instance& inst, const EnvConfig& config) {
  SearchState next;
  next.current = apply_move(state.current, move, inst);
  next.best = next.current.length < state.best.length ? next.current : state.best;
  double reward = state.best.length - next.best.length;  // >= 0 by construction
  if (config.reward_clip) reward = std::min(reward, *config.reward_clip);
  return {std::move(next), reward};
}

std::vector<double> compute_returns(const std::vector<double>& rewards, double gamma) {
  std::vector<double> returns(rewards.size());
  double acc = 0.0;
  for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
    acc = rewards[static_cast<std::size_t>(t)] + gamma * acc;
    returns[static_cast<std::size_t>(t)] = acc;
  }
  return returns;
}

}  // namespace opt2rl::rl
