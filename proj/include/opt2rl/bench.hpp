#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "opt2rl/model.hpp"
#include "opt2rl/tsp.hpp"

namespace opt2rl::io {

// Deterministic i.i.d. uniform instances in the unit square.
std::vector<Instance> generate_instances(int n, int count, std::uint64_t seed);

// EUC_2D TSPLIB instance. `scaled` is the policy-facing copy, min-max mapped
// into [0,1]^2 with the longer axis spanning [0,1]; `rounded_dist` follows
// the TSPLIB convention of nearest-integer edge lengths on the original
// coordinates and is what reported costs use.
struct TsplibInstance {
  std::string name;
  int dimension = 0;
  Eigen::Matrix2Xd original_coords;
  Instance scaled;
  Mat rounded_dist;
};

TsplibInstance parse_tsplib(const std::string& text);
TsplibInstance load_tsplib_file(const std::string& path);

// Published optimal tour lengths used as gap denominators, keyed by
// instance name (eil51 -> 426, berlin52 -> 7542, ...).
std::optional<double> tsplib_known_optimum(const std::string& name);

// Versioned binary checkpoint: magic, version, net config, named tensors.
void save_checkpoint(const nn::ModelParams& params, const std::string& path);
nn::ModelParams load_checkpoint(const std::string& path);
std::string describe_checkpoint(const std::string& path);

struct EvalOptions {
  int steps = 1000;
  nn::DecodeMode mode = nn::DecodeMode::Sample;
  std::uint64_t seed = 0;
  int threads = 0;
  // When set, instance i starts from initial_tours[i] instead of a seeded
  // random tour (used to share starts across improvement methods).
  const std::vector<Tour>* initial_tours = nullptr;
};

struct EvalResult {
  double best_cost = 0.0;
  int best_step = 0;                // step index where the best tour appeared
  std::vector<int> best_order;      // the best tour itself
  std::vector<double> best_trace;   // best-so-far length after each step
};

// Rolls the policy from a random (or given) tour for `steps` environment
// steps per instance, tracking the best tour seen.
std::vector<EvalResult> evaluate_policy(const nn::ModelParams& params,
                                        const std::vector<Instance>& instances,
                                        const EvalOptions& options);

// Same protocol with moves drawn uniformly from the n(n-1)/2 pairs.
std::vector<EvalResult> evaluate_random_policy(const std::vector<Instance>& instances,
                                               const EvalOptions& options);

// One move of the parameterless uniform-random policy.
Move uniform_random_move(std::mt19937_64& rng, int n);

struct BenchmarkConfig {
  int n = 20;
  int count = 1000;
  std::uint64_t instance_seed = 1;
  std::uint64_t eval_seed = 2;
  int steps = 1000;
  std::vector<std::string> methods;  // nearest | random | farthest | fi | bi |
                                     // fi+restarts | bi+restarts |
                                     // policy:<ckpt> | held-karp
  int threads = 0;
  int oracle_cap = 20;
  bool timing = true;
};

struct BenchmarkRow {
  std::string method;
  double mean_cost = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> mean_gap_pct;
  int steps = 0;
  double wallclock_s = 0.0;
  std::string note;
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::vector<BenchmarkRow> rows;
};

// Test seam: observes the start tour every improvement method uses.
using StartObserver = std::function<void(const std::string& method, int instance, const Tour&)>;

BenchmarkReport run_benchmark(const BenchmarkConfig& config,
                              const StartObserver& observer = nullptr);

std::string report_to_csv(const BenchmarkReport& report);
BenchmarkReport report_from_csv(const std::string& csv);
std::string report_to_table(const BenchmarkReport& report);

// 6-significant-digit float formatting shared by all CSV emitters.
std::string format_g6(double v);

}  // namespace opt2rl::io
