#include "opt2rl/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "opt2rl/bench.hpp"
#include "opt2rl/exact.hpp"
#include "opt2rl/parallel.hpp"
#include "opt2rl/rng.hpp"

namespace opt2rl::rl {

void validate(const TrainConfig& c) {
  nn::validate(c.net);
  if (c.n < kMinNodes) throw std::invalid_argument("TrainConfig: n must be >= 4");
  if (c.epochs < 1 || c.batches_per_epoch < 1 || c.batch_size < 1 || c.total_steps < 1)
    throw std::invalid_argument("TrainConfig: counts must be positive");
  if (c.episode_schedule.empty() || c.episode_schedule.front().first != 1)
    throw std::invalid_argument("TrainConfig: episode schedule must start at epoch 1");
  for (const auto& [epoch, len] : c.episode_schedule) {
    if (epoch < 1 || epoch > c.epochs)
      throw std::invalid_argument("TrainConfig: schedule epoch out of range");
    if (len < 1 || len > c.total_steps)
      throw std::invalid_argument("TrainConfig: schedule length out of range");
  }
  if (!(c.gamma > 0.0) || c.gamma > 1.0)
    throw std::invalid_argument("TrainConfig: gamma must be in (0,1]");
  if (!(c.lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
}

int episode_length_for_epoch(const std::vector<std::pair<int, int>>& schedule, int epoch) {
  int t = schedule.front().second;
  for (const auto& [e, len] : schedule)
    if (e <= epoch) t = len;
  return t;
}

std::vector<EpisodeRollout> rollout_episode(std::vector<EnvSlot>& envs,
                                            const nn::ModelParams& params, int T,
                                            const EnvConfig& env_config, int threads) {
  if (T < 1) throw std::invalid_argument("rollout_episode: T must be >= 1");
  const int B = static_cast<int>(envs.size());
  const int chunks = (B + kRolloutSubBatch - 1) / kRolloutSubBatch;
  std::vector<EpisodeRollout> episodes(static_cast<std::size_t>(chunks));
  parallel_for(chunks, threads, [&](int c) {
    const int lo = c * kRolloutSubBatch;
    const int hi = std::min(B, lo + kRolloutSubBatch);
    const int count = hi - lo;
    EpisodeRollout& ep = episodes[static_cast<std::size_t>(c)];
    ep.tape = std::make_unique<ad::Tape>();
    ep.bound = nn::bind(*ep.tape, params);
    ep.env_offset = lo;
    ep.env_steps.assign(static_cast<std::size_t>(count), {});
    for (auto& steps : ep.env_steps) steps.reserve(static_cast<std::size_t>(T));

    std::vector<const Instance*> instances(static_cast<std::size_t>(count));
    std::vector<std::mt19937_64*> rngs(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
      instances[static_cast<std::size_t>(k)] = envs[static_cast<std::size_t>(lo + k)].instance;
      rngs[static_cast<std::size_t>(k)] = &envs[static_cast<std::size_t>(lo + k)].rng;
    }

    for (int t = 0; t < T; ++t) {
      std::vector<const SearchState*> states(static_cast<std::size_t>(count));
      for (int k = 0; k < count; ++k)
        states[static_cast<std::size_t>(k)] = &envs[static_cast<std::size_t>(lo + k)].state;
      const auto stepped = nn::batched_policy_value_step(*ep.tape, instances, states, ep.bound,
                                                         rngs, nn::DecodeMode::Sample);
      for (int k = 0; k < count; ++k) {
        EnvSlot& env = envs[static_cast<std::size_t>(lo + k)];
        StepRecord rec;
        rec.state = env.state;
        rec.move = stepped[static_cast<std::size_t>(k)].move;
        rec.log_prob = stepped[static_cast<std::size_t>(k)].log_prob;
        rec.entropy = stepped[static_cast<std::size_t>(k)].entropy;
        rec.value_var = stepped[static_cast<std::size_t>(k)].value;
        rec.value = rec.value_var.scalar();
        auto [next, reward] = step(env.state, rec.move, *env.instance, env_config);
        rec.reward = reward;
        env.state = std::move(next);
        ep.env_steps[static_cast<std::size_t>(k)].push_back(std::move(rec));
      }
    }

    for (auto& steps : ep.env_steps) {
      std::vector<double> rewards(steps.size());
      for (std::size_t t = 0; t < steps.size(); ++t) rewards[t] = steps[t].reward;
      const std::vector<double> returns = compute_returns(rewards, env_config.gamma);
      for (std::size_t t = 0; t < steps.size(); ++t) {
        steps[t].ret = returns[t];
        steps[t].advantage = returns[t] - steps[t].value;
      }
    }
  });
  return episodes;
}

std::pair<std::vector<ad::Var>, LossReport> policy_value_loss(std::vector<EpisodeRollout>& episodes,
                                                              double beta_h, double beta_v,
                                                              int k) {
  if (episodes.empty()) throw std::invalid_argument("policy_value_loss: empty batch");
  double B = 0;
  for (const EpisodeRollout& ep : episodes) B += static_cast<double>(ep.env_steps.size());
  LossReport report;
  std::vector<ad::Var> losses;
  losses.reserve(episodes.size());
  long records = 0;
  for (EpisodeRollout& ep : episodes) {
    ad::Tape& tape = *ep.tape;
    ad::Var loss = tape.constant_scalar(0.0);
    for (auto& steps : ep.env_steps) {
      const double T = static_cast<double>(steps.size());
      for (StepRecord& rec : steps) {
        // Advantage enters as a constant: the baseline is detached.
        loss = tape.add(loss, tape.scale(rec.log_prob, -rec.advantage / (B * k * T)));
        loss = tape.add(loss, tape.scale(rec.entropy, -beta_h / (B * k)));
        ad::Var err = tape.sub(rec.value_var, tape.constant_scalar(rec.ret));
        loss = tape.add(loss, tape.scale(tape.square(err), beta_v / (B * T)));

        report.policy_term += -rec.log_prob.scalar() * rec.advantage / (B * k * T);
        report.entropy_term += -beta_h * rec.entropy.scalar() / (B * k);
        report.value_term += beta_v * (rec.value - rec.ret) * (rec.value - rec.ret) / (B * T);
        report.mean_advantage += rec.advantage;
        report.mean_return += rec.ret;
        report.mean_entropy += rec.entropy.scalar();
        ++records;
      }
    }
    losses.push_back(loss);
    report.total += loss.scalar();
  }
  report.mean_advantage /= static_cast<double>(records);
  report.mean_return /= static_cast<double>(records);
  report.mean_entropy /= static_cast<double>(records);
  if (!std::isfinite(report.total)) {
    std::ostringstream msg;
    msg << "policy_value_loss: non-finite loss (policy=" << report.policy_term
        << " entropy=" << report.entropy_term << " value=" << report.value_term << ")";
    throw std::runtime_error(msg.str());
  }
  return {std::move(losses), report};
}

void accumulate_gradients(std::vector<EpisodeRollout>& episodes,
                          const std::vector<ad::Var>& losses, std::vector<Mat>& grads,
                          int threads) {
  if (episodes.size() != losses.size())
    throw std::invalid_argument("accumulate_gradients: episodes/losses mismatch");
  parallel_for(static_cast<int>(episodes.size()), threads,
               [&](int b) { episodes[static_cast<std::size_t>(b)].tape->backward(losses[static_cast<std::size_t>(b)]); });
  const std::size_t num = episodes.front().bound.leaves.size();
  if (grads.size() != num) {
    grads.assign(num, Mat());
    for (std::size_t k = 0; k < num; ++k) {
      const ad::Var& leaf = episodes.front().bound.leaves[k];
      grads[k] = Mat::Zero(leaf.rows(), leaf.cols());
    }
  } else {
    for (Mat& g : grads) g.setZero();
  }
  for (EpisodeRollout& ep : episodes) {
    for (std::size_t k = 0; k < num; ++k) {
      const Mat& g = ep.bound.leaves[k].grad();
      if (g.size() != 0) grads[k] += g;
    }
  }
}

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

struct MetricsRow {
  int epoch = 0;
  int batch = 0;
  double mean_return = 0.0;
  double mean_entropy = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double val_gap_pct = std::numeric_limits<double>::quiet_NaN();
  double wallclock_s = 0.0;
};

}  // namespace

TrainResult train(const TrainConfig& config) {
  validate(config);
  const int threads = resolve_threads(config.threads);
  nn::ModelParams params = nn::init_params(config.net, config.seed);
  nn::ModelParams last_good = params;
  ad::AdamState adam;
  std::vector<Mat> grads;

  EnvConfig env_config;
  env_config.total_steps = config.total_steps;
  env_config.gamma = config.gamma;
  env_config.reward_clip = config.reward_clip;

  // Fixed held-out validation set with exact optima when the oracle can.
  const std::vector<Instance> val_set =
      io::generate_instances(config.n, config.val_instances, derive_seed(config.seed, 0x7a11));
  std::vector<double> val_optima;
  if (config.n <= config.oracle_cap) {
    val_optima.resize(val_set.size());
    parallel_for(static_cast<int>(val_set.size()), threads, [&](int i) {
      val_optima[static_cast<std::size_t>(i)] =
          held_karp(val_set[static_cast<std::size_t>(i)], config.oracle_cap).length;
    });
  }

  auto validate_gap = [&](int epoch) {
    io::EvalOptions opts;
    opts.steps = config.val_steps;
    opts.mode = nn::DecodeMode::Sample;
    opts.seed = derive_seed(config.seed, 0x7a12, static_cast<std::uint64_t>(epoch));
    opts.threads = threads;
    const auto results = io::evaluate_policy(params, val_set, opts);
    if (val_optima.empty()) return std::numeric_limits<double>::quiet_NaN();
    double gap = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i)
      gap += optimality_gap(results[i].best_cost, val_optima[i]);
    return gap / static_cast<double>(results.size());
  };

  TrainResult out;
  std::vector<MetricsRow> rows;
  double lr = config.lr;
  double beta_h = config.beta_h;

  const bool write_files = !config.out_dir.empty();
  if (write_files) std::filesystem::create_directories(config.out_dir);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const int T = episode_length_for_epoch(config.episode_schedule, epoch);
    env_config.episode_length = T;
    std::vector<MetricsRow> epoch_rows;

    for (int batch = 1; batch <= config.batches_per_epoch; ++batch) {
      const double t0 = now_s();
      // Fresh instances and fresh random initial solutions every batch.
      const std::vector<Instance> instances = io::generate_instances(
          config.n, config.batch_size,
          derive_seed(config.seed, 0x1457, static_cast<std::uint64_t>(epoch),
                      static_cast<std::uint64_t>(batch)));
      std::vector<EnvSlot> envs(static_cast<std::size_t>(config.batch_size));
      for (int b = 0; b < config.batch_size; ++b) {
        EnvSlot& env = envs[static_cast<std::size_t>(b)];
        env.instance = &instances[static_cast<std::size_t>(b)];
        env.rng.seed(derive_seed(config.seed, 0xe5e5, static_cast<std::uint64_t>(epoch),
                                 static_cast<std::uint64_t>(batch * 100000 + b)));
        env.state = reset(*env.instance, env.rng);
      }

      MetricsRow row;
      row.epoch = epoch;
      row.batch = batch;
      int updates = 0;
      int t = 0;
      while (t < config.total_steps) {
        const int steps_now = std::min(T, config.total_steps - t);
        auto episodes = rollout_episode(envs, params, steps_now, env_config, threads);
        auto [losses, report] = policy_value_loss(episodes, beta_h, config.beta_v);
        accumulate_gradients(episodes, losses, grads, threads);

        auto named = params.tensors();
        std::vector<Mat*> ps(named.size());
        std::vector<const Mat*> gs(named.size());
        for (std::size_t k = 0; k < named.size(); ++k) {
          ps[k] = named[k].second;
          gs[k] = &grads[k];
        }
        ad::adam_step(ps, gs, adam, lr, 0.9, 0.999, 1e-8, config.weight_decay);
        if (!nn::all_finite(params)) {
          if (write_files)
            io::save_checkpoint(last_good, config.out_dir + "/ckpt_last_good.o2rl");
          throw std::runtime_error("train: non-finite parameters after epoch " +
                                   std::to_string(epoch) + "; last good checkpoint saved");
        }
        row.mean_return += report.mean_return;
        row.mean_entropy += report.mean_entropy;
        row.policy_loss += report.policy_term;
        row.value_loss += report.value_term;
        ++updates;
        t += steps_now;
      }
      row.mean_return /= updates;
      row.mean_entropy /= updates;
      row.policy_loss /= updates;
      row.value_loss /= updates;
      row.wallclock_s = config.timing ? now_s() - t0 : 0.0;
      epoch_rows.push_back(row);
    }

    lr *= config.lr_decay;
    beta_h *= config.beta_h_decay;
    last_good = params;

    if (epoch % config.val_every == 0 || epoch == config.epochs) {
      const double gap = validate_gap(epoch);
      for (MetricsRow& row : epoch_rows) row.val_gap_pct = gap;
      out.final_val_gap_pct = gap;
    }
    rows.insert(rows.end(), epoch_rows.begin(), epoch_rows.end());

    if (write_files && (epoch % config.ckpt_every == 0 || epoch == config.epochs)) {
      const std::string path = config.out_dir + "/ckpt_epoch_" + std::to_string(epoch) + ".o2rl";
      io::save_checkpoint(params, path);
      out.checkpoint_paths.push_back(path);
    }
  }

  std::ostringstream csv;
  csv << "epoch,batch,mean_return,mean_entropy,policy_loss,value_loss,val_gap_pct,wallclock_s\n";
  for (const MetricsRow& row : rows) {
    csv << row.epoch << ',' << row.batch << ',' << io::format_g6(row.mean_return) << ','
        << io::format_g6(row.mean_entropy) << ',' << io::format_g6(row.policy_loss) << ','
        << io::format_g6(row.value_loss) << ','
        << (std::isnan(row.val_gap_pct) ? std::string() : io::format_g6(row.val_gap_pct)) << ','
        << io::format_g6(row.wallclock_s) << '\n';
  }
  out.metrics_csv = csv.str();
  if (write_files) {
    std::ofstream f(config.out_dir + "/metrics.csv", std::ios::binary);
    f << out.metrics_csv;
  }
  if (write_files) {
    const std::string path = config.out_dir + "/ckpt_final.o2rl";
    io::save_checkpoint(params, path);
    out.checkpoint_paths.push_back(path);
  }
  out.params = std::move(params);
  return out;
}

}  // namespace opt2rl::rl
