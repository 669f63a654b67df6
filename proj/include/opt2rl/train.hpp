#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opt2rl/adam.hpp"
#include "opt2rl/env.hpp"
#include "opt2rl/model.hpp"

namespace opt2rl::rl {

struct TrainConfig {
  int n = 10;
  int epochs = 30;
  int batches_per_epoch = 3;  // N_B
  int batch_size = 64;        // B
  int total_steps = 40;       // step limit of one run
  // epoch -> episode length; the entry with the largest epoch <= e applies.
  std::vector<std::pair<int, int>> episode_schedule = {{1, 4}, {10, 8}};
  double gamma = 0.99;
  double lr = 1e-3;
  double lr_decay = 0.98;
  double beta_v = 0.5;
  double beta_h = 0.0045;
  double beta_h_decay = 0.9;
  double weight_decay = 1e-5;
  std::optional<double> reward_clip = 1.0;
  int val_instances = 256;
  int val_steps = 200;
  int val_every = 1;
  int ckpt_every = 10;
  int oracle_cap = 20;  // validation gaps need exact optima
  nn::NetConfig net;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir;  // metrics + checkpoints; empty keeps everything in memory
  bool timing = true;   // false writes wallclock as 0 for byte-identical reruns
};

void validate(const TrainConfig& config);

// Episode length T_e for the (1-based) epoch.
int episode_length_for_epoch(const std::vector<std::pair<int, int>>& schedule, int epoch);

struct StepRecord {
  SearchState state;  // state the action was taken in
  Move move;
  double reward = 0.0;
  ad::Var log_prob;  // on the episode tape
  ad::Var entropy;
  ad::Var value_var;
  double value = 0.0;      // detached value estimate
  double ret = 0.0;        // G_t
  double advantage = 0.0;  // G_t - value, treated as a constant in the loss
};

// One environment of the batch. `rng` drives resets and action sampling.
struct EnvSlot {
  const Instance* instance = nullptr;
  SearchState state;
  std::mt19937_64 rng;
};

// Environments are rolled out in fixed sub-batches of this size, each on its
// own tape; states within a sub-batch are encoded together as matrix
// columns. The fixed size keeps results independent of the thread count.
inline constexpr int kRolloutSubBatch = 32;

// Everything one sub-batch produced in one episode. The tape owns the
// recorded graph; Vars in the records stay valid until it is destroyed.
struct EpisodeRollout {
  std::unique_ptr<ad::Tape> tape;
  nn::BoundParams bound;
  int env_offset = 0;                             // global index of env_steps[0]
  std::vector<std::vector<StepRecord>> env_steps;  // [local env][t]
};

// Samples T policy steps per environment against a frozen parameter
// snapshot. States in `envs` advance to the episode's final state; returns
// and advantages are filled in from the collected rewards.
std::vector<EpisodeRollout> rollout_episode(std::vector<EnvSlot>& envs,
                                            const nn::ModelParams& params, int T,
                                            const EnvConfig& env_config, int threads);

struct LossReport {
  double policy_term = 0.0;
  double entropy_term = 0.0;
  double value_term = 0.0;
  double mean_advantage = 0.0;
  double mean_return = 0.0;
  double mean_entropy = 0.0;
  double total = 0.0;
};

// Builds the combined scalar loss on every episode tape:
//   -(1/(B k)) (1/T) sum log pi * A - (beta_h/(B k)) sum H
//   + (beta_v/(B T)) sum (G - V)^2
// so that one minimization step matches the paper's ascent/descent pair.
// Returns the loss Vars (one per episode) plus the aggregated report.
std::pair<std::vector<ad::Var>, LossReport> policy_value_loss(std::vector<EpisodeRollout>& episodes,
                                                              double beta_h, double beta_v,
                                                              int k = 2);

// Runs backward on every episode loss (parallel over episodes) and sums the
// leaf gradients in episode order into `grads`, aligned with
// ModelParams::tensors() order.
void accumulate_gradients(std::vector<EpisodeRollout>& episodes,
                          const std::vector<ad::Var>& losses, std::vector<Mat>& grads,
                          int threads);

struct TrainResult {
  nn::ModelParams params;
  std::string metrics_csv;
  std::vector<std::string> checkpoint_paths;
  double final_val_gap_pct = std::numeric_limits<double>::quiet_NaN();
};

TrainResult train(const TrainConfig& config);

}  // namespace opt2rl::rl
