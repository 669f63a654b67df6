// Command-line front end: instance generation, training, policy evaluation,
// heuristic benchmarking, exact solving and checkpoint inspection.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "opt2rl/bench.hpp"
#include "opt2rl/exact.hpp"
#include "opt2rl/heuristics.hpp"
#include "opt2rl/parallel.hpp"
#include "opt2rl/rng.hpp"
#include "opt2rl/train.hpp"

namespace {

using namespace opt2rl;

struct GlobalOpts {
  std::uint64_t seed = 1;
  std::string out = ".";
  int threads = 0;
  bool no_timing = false;
};

void ensure_out(const std::string& dir) { std::filesystem::create_directories(dir); }

// epoch:length pairs, e.g. "1:4,10:8"
std::vector<std::pair<int, int>> parse_schedule(const std::string& text) {
  std::vector<std::pair<int, int>> schedule;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw CLI::ValidationError("--episode-schedule", "expected epoch:length pairs");
    schedule.emplace_back(std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1)));
  }
  return schedule;
}

int cmd_gen(const GlobalOpts& g, int n, int count) {
  const auto instances = io::generate_instances(n, count, g.seed);
  ensure_out(g.out);
  const std::string path = g.out + "/instances.csv";
  std::ofstream f(path, std::ios::binary);
  f << "instance,node,x,y\n";
  for (std::size_t i = 0; i < instances.size(); ++i)
    for (int k = 0; k < n; ++k)
      f << i << ',' << k << ',' << io::format_g6(instances[i].coords(0, k)) << ','
        << io::format_g6(instances[i].coords(1, k)) << '\n';
  std::cout << "wrote " << count << " instances of size " << n << " to " << path << "\n";
  return 0;
}

int cmd_oracle(const GlobalOpts& g, int n, int count, int cap) {
  const auto instances = io::generate_instances(n, count, g.seed);
  std::vector<double> costs(instances.size());
  parallel_for(static_cast<int>(instances.size()), g.threads,
               [&](int i) { costs[static_cast<std::size_t>(i)] = held_karp(instances[static_cast<std::size_t>(i)], cap).length; });
  double mean = 0.0;
  for (double c : costs) mean += c;
  mean /= static_cast<double>(costs.size());
  std::cout << "held-karp mean optimal cost over " << count << " TSP" << n
            << " instances: " << io::format_g6(mean) << "\n";
  return 0;
}

int cmd_inspect(const std::string& path) {
  std::cout << io::describe_checkpoint(path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"opt2rl: 2-opt improvement policies for the Euclidean TSP"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file (flags override)");

  GlobalOpts g;
  app.add_option("--seed", g.seed, "master RNG seed")->capture_default_str();
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = hardware)")->capture_default_str();
  app.add_flag("--no-timing", g.no_timing, "write wallclock fields as 0 for reproducible output");

  // gen
  auto* gen = app.add_subcommand("gen", "generate uniform instances");
  int gen_n = 20, gen_count = 100;
  gen->add_option("--n", gen_n, "nodes per instance")->capture_default_str();
  gen->add_option("--count", gen_count, "number of instances")->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "train a 2-opt policy");
  rl::TrainConfig tc;
  std::string schedule_text = "1:4,10:8";
  tr->add_option("--n", tc.n, "instance size")->capture_default_str();
  tr->add_option("--epochs", tc.epochs)->capture_default_str();
  tr->add_option("--batches", tc.batches_per_epoch, "batches per epoch")->capture_default_str();
  tr->add_option("--batch-size", tc.batch_size)->capture_default_str();
  tr->add_option("--total-steps", tc.total_steps, "environment steps per run")->capture_default_str();
  tr->add_option("--episode-schedule", schedule_text, "epoch:length pairs")->capture_default_str();
  tr->add_option("--gamma", tc.gamma)->capture_default_str();
  tr->add_option("--lr", tc.lr)->capture_default_str();
  tr->add_option("--lr-decay", tc.lr_decay)->capture_default_str();
  tr->add_option("--beta-v", tc.beta_v)->capture_default_str();
  tr->add_option("--beta-h", tc.beta_h)->capture_default_str();
  tr->add_option("--beta-h-decay", tc.beta_h_decay)->capture_default_str();
  tr->add_option("--weight-decay", tc.weight_decay)->capture_default_str();
  double clip = 1.0;
  bool no_clip = false;
  tr->add_option("--reward-clip", clip)->capture_default_str();
  tr->add_flag("--no-reward-clip", no_clip, "disable reward clipping");
  tr->add_option("--val-instances", tc.val_instances)->capture_default_str();
  tr->add_option("--val-steps", tc.val_steps)->capture_default_str();
  tr->add_option("--val-every", tc.val_every)->capture_default_str();
  tr->add_option("--ckpt-every", tc.ckpt_every)->capture_default_str();
  tr->add_option("--d", tc.net.d, "embedding width")->capture_default_str();
  tr->add_option("--gcn-layers", tc.net.gcn_layers)->capture_default_str();
  tr->add_option("--clip", tc.net.logit_clip, "logit clip C")->capture_default_str();
  bool no_gcn = false, no_lstm = false, no_bidir = false, no_best = false, shared = false;
  tr->add_flag("--no-gcn", no_gcn, "ablation: drop graph convolutions");
  tr->add_flag("--no-lstm", no_lstm, "ablation: drop sequence encoding");
  tr->add_flag("--no-bidirectional", no_bidir, "ablation: forward LSTM only");
  tr->add_flag("--no-best-solution", no_best, "ablation: ignore the best tour");
  tr->add_flag("--share-encoders", shared, "ablation: one encoder for S and S'");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt;
  int ev_n = 10, ev_count = 256, ev_steps = 200;
  std::string ev_mode = "sample";
  std::string ev_tsplib;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--n", ev_n)->capture_default_str();
  ev->add_option("--count", ev_count)->capture_default_str();
  ev->add_option("--steps", ev_steps)->capture_default_str();
  ev->add_option("--mode", ev_mode, "sample|greedy")->capture_default_str();
  ev->add_option("--tsplib", ev_tsplib, "evaluate a TSPLIB file instead of random instances");

  // bench
  auto* be = app.add_subcommand("bench", "benchmark methods on a shared instance set");
  io::BenchmarkConfig bc;
  std::string methods_text = "nearest,random,farthest,held-karp";
  be->add_option("--n", bc.n)->capture_default_str();
  be->add_option("--count", bc.count)->capture_default_str();
  be->add_option("--steps", bc.steps, "step budget for improvement methods")->capture_default_str();
  be->add_option("--methods", methods_text,
                 "comma list: nearest,random,farthest,fi,bi,fi+restarts,bi+restarts,"
                 "policy:<ckpt>,held-karp")
      ->capture_default_str();
  be->add_option("--oracle-cap", bc.oracle_cap)->capture_default_str();

  // oracle
  auto* orc = app.add_subcommand("oracle", "mean exact cost on uniform instances");
  int or_n = 20, or_count = 100, or_cap = 20;
  orc->add_option("--n", or_n)->capture_default_str();
  orc->add_option("--count", or_count)->capture_default_str();
  orc->add_option("--cap", or_cap, "maximum instance size")->capture_default_str();

  // inspect-ckpt
  auto* ins = app.add_subcommand("inspect-ckpt", "print checkpoint config and tensors");
  std::string ins_path;
  ins->add_option("path", ins_path, "checkpoint path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(g, gen_n, gen_count);

    if (tr->parsed()) {
      tc.episode_schedule = parse_schedule(schedule_text);
      tc.reward_clip = no_clip ? std::nullopt : std::optional<double>(clip);
      tc.net.use_gcn = !no_gcn;
      tc.net.use_lstm = !no_lstm;
      tc.net.use_bidirectional = !no_bidir;
      tc.net.use_best_solution = !no_best;
      tc.net.share_encoders = shared;
      tc.seed = g.seed;
      tc.threads = g.threads;
      tc.timing = !g.no_timing;
      ensure_out(g.out);
      tc.out_dir = g.out;
      const rl::TrainResult result = rl::train(tc);
      std::cout << "training done; final validation gap: "
                << io::format_g6(result.final_val_gap_pct) << "%\n";
      for (const auto& p : result.checkpoint_paths) std::cout << "checkpoint: " << p << "\n";
      std::cout << "metrics: " << tc.out_dir << "/metrics.csv\n";
      return 0;
    }

    if (ev->parsed()) {
      const nn::ModelParams params = io::load_checkpoint(ev_ckpt);
      io::EvalOptions opts;
      opts.steps = ev_steps;
      opts.mode = ev_mode == "greedy" ? nn::DecodeMode::Greedy : nn::DecodeMode::Sample;
      opts.seed = g.seed;
      opts.threads = g.threads;
      if (!ev_tsplib.empty()) {
        const io::TsplibInstance tsp = io::load_tsplib_file(ev_tsplib);
        const auto results = io::evaluate_policy(params, {tsp.scaled}, opts);
        const double rounded = tour_cost(tsp.rounded_dist, results[0].best_order);
        std::cout << tsp.name << ": best rounded cost " << io::format_g6(rounded) << " (found at step "
                  << results[0].best_step << ")";
        if (const auto opt = io::tsplib_known_optimum(tsp.name)) {
          std::cout << ", optimum " << io::format_g6(*opt) << ", gap "
                    << io::format_g6(optimality_gap(rounded, *opt)) << "%";
        }
        std::cout << "\n";
        return 0;
      }
      const auto instances = io::generate_instances(ev_n, ev_count, derive_seed(g.seed, 0x9e7a));
      const auto results = io::evaluate_policy(params, instances, opts);
      double mean = 0.0;
      for (const auto& r : results) mean += r.best_cost;
      mean /= static_cast<double>(results.size());
      std::cout << "mean best cost over " << ev_count << " TSP" << ev_n << " instances after "
                << ev_steps << " steps: " << io::format_g6(mean) << "\n";
      return 0;
    }

    if (be->parsed()) {
      bc.methods.clear();
      std::istringstream ms(methods_text);
      std::string m;
      while (std::getline(ms, m, ',')) bc.methods.push_back(m);
      bc.instance_seed = derive_seed(g.seed, 0x1257);
      bc.eval_seed = derive_seed(g.seed, 0xe0a1);
      bc.threads = g.threads;
      bc.timing = !g.no_timing;
      const io::BenchmarkReport report = io::run_benchmark(bc);
      ensure_out(g.out);
      const std::string path = g.out + "/report.csv";
      std::ofstream f(path, std::ios::binary);
      f << io::report_to_csv(report);
      std::cout << io::report_to_table(report) << "report: " << path << "\n";
      return 0;
    }

    if (orc->parsed()) return cmd_oracle(g, or_n, or_count, or_cap);
    if (ins->parsed()) return cmd_inspect(ins_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
