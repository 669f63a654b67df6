#include "opt2rl/bench.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "opt2rl/env.hpp"
#include "opt2rl/exact.hpp"
#include "opt2rl/heuristics.hpp"
#include "opt2rl/parallel.hpp"
#include "opt2rl/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace opt2rl::io {

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::vector<Instance> generate_instances(int n, int count, std::uint64_t seed) {
  if (n < kMinNodes) throw std::invalid_argument("generate_instances: n must be >= 4");
  if (count < 1) throw std::invalid_argument("generate_instances: count must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Instance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    Eigen::Matrix2Xd coords(2, n);
    for (int i = 0; i < n; ++i) {
      coords(0, i) = uniform01(rng);
      coords(1, i) = uniform01(rng);
    }
    out.push_back(make_instance(std::move(coords)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// TSPLIB (EUC_2D subset)
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

TsplibInstance parse_tsplib(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  TsplibInstance out;
  std::string edge_weight_type;
  bool in_coords = false;
  int read_nodes = 0;

  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t == "EOF") break;
    if (!in_coords) {
      if (t == "NODE_COORD_SECTION") {
        if (out.dimension <= 0)
          throw std::invalid_argument("tsplib: NODE_COORD_SECTION before DIMENSION (line " +
                                      std::to_string(lineno) + ")");
        out.original_coords.resize(2, out.dimension);
        in_coords = true;
        continue;
      }
      const auto colon = t.find(':');
      const std::string key = trim(colon == std::string::npos ? t : t.substr(0, colon));
      const std::string value = colon == std::string::npos ? "" : trim(t.substr(colon + 1));
      if (key == "NAME") out.name = value;
      else if (key == "DIMENSION") out.dimension = std::stoi(value);
      else if (key == "EDGE_WEIGHT_TYPE") edge_weight_type = value;
      // TYPE / COMMENT and other keywords are accepted and ignored.
      continue;
    }
    std::istringstream ls(t);
    int idx = 0;
    double x = 0.0, y = 0.0;
    if (!(ls >> idx >> x >> y))
      throw std::invalid_argument("tsplib: malformed coordinate line " + std::to_string(lineno) +
                                  ": '" + t + "'");
    if (idx < 1 || idx > out.dimension)
      throw std::invalid_argument("tsplib: node index out of range at line " +
                                  std::to_string(lineno));
    out.original_coords(0, idx - 1) = x;
    out.original_coords(1, idx - 1) = y;
    ++read_nodes;
  }

  if (edge_weight_type != "EUC_2D")
    throw std::invalid_argument("tsplib: unsupported EDGE_WEIGHT_TYPE '" + edge_weight_type +
                                "' (only EUC_2D is supported)");
  if (out.dimension <= 0) throw std::invalid_argument("tsplib: missing DIMENSION");
  if (read_nodes != out.dimension)
    throw std::invalid_argument("tsplib: expected " + std::to_string(out.dimension) +
                                " coordinates, got " + std::to_string(read_nodes));

  // Policy-facing copy: min-max into the unit square, aspect ratio kept
  // (the longer axis spans [0,1]).
  const double xmin = out.original_coords.row(0).minCoeff();
  const double xmax = out.original_coords.row(0).maxCoeff();
  const double ymin = out.original_coords.row(1).minCoeff();
  const double ymax = out.original_coords.row(1).maxCoeff();
  const double span = std::max(xmax - xmin, ymax - ymin);
  if (!(span > 0.0)) throw std::invalid_argument("tsplib: degenerate instance, zero extent");
  Eigen::Matrix2Xd scaled = out.original_coords;
  scaled.row(0).array() = (scaled.row(0).array() - xmin) / span;
  scaled.row(1).array() = (scaled.row(1).array() - ymin) / span;
  out.scaled = make_instance(std::move(scaled));

  // Reported costs follow the TSPLIB convention: nint of the Euclidean
  // distance on the original coordinates.
  const int n = out.dimension;
  out.rounded_dist.resize(n, n);
  for (int i = 0; i < n; ++i) {
    out.rounded_dist(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double d = (out.original_coords.col(i) - out.original_coords.col(j)).norm();
      const double r = std::floor(d + 0.5);
      out.rounded_dist(i, j) = r;
      out.rounded_dist(j, i) = r;
    }
  }
  return out;
}

TsplibInstance load_tsplib_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open TSPLIB file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_tsplib(ss.str());
}

std::optional<double> tsplib_known_optimum(const std::string& name) {
  static const std::map<std::string, double> table = {
      {"eil51", 426},    {"berlin52", 7542}, {"pr76", 108159}, {"rd100", 7910},
      {"eil101", 629},   {"lin105", 14379},  {"ch130", 6110},  {"pr144", 58537},
      {"ts225", 126643}, {"a280", 2579},
  };
  const auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'O', '2', 'R', 'L'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_u8(std::ostream& out, std::uint8_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error("checkpoint: truncated file");
  return v;
}
double get_f64(std::istream& in) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error("checkpoint: truncated file");
  return v;
}
std::uint8_t get_u8(std::istream& in) {
  std::uint8_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw std::runtime_error("checkpoint: truncated file");
  return v;
}

nn::NetConfig read_header(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic (not an O2RL checkpoint)");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  nn::NetConfig c;
  c.d = static_cast<int>(get_u32(in));
  c.gcn_layers = static_cast<int>(get_u32(in));
  c.logit_clip = get_f64(in);
  c.use_gcn = get_u8(in) != 0;
  c.use_lstm = get_u8(in) != 0;
  c.use_bidirectional = get_u8(in) != 0;
  c.use_best_solution = get_u8(in) != 0;
  c.share_encoders = get_u8(in) != 0;
  return c;
}

}  // namespace

void save_checkpoint(const nn::ModelParams& params, const std::string& path) {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  const nn::NetConfig& c = params.config;
  put_u32(out, static_cast<std::uint32_t>(c.d));
  put_u32(out, static_cast<std::uint32_t>(c.gcn_layers));
  put_f64(out, c.logit_clip);
  put_u8(out, c.use_gcn);
  put_u8(out, c.use_lstm);
  put_u8(out, c.use_bidirectional);
  put_u8(out, c.use_best_solution);
  put_u8(out, c.share_encoders);
  const auto tensors = params.tensors();
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(m->rows()));
    put_u32(out, static_cast<std::uint32_t>(m->cols()));
    for (long r = 0; r < m->rows(); ++r)
      for (long col = 0; col < m->cols(); ++col) put_f64(out, (*m)(r, col));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  const std::string blob = out.str();
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

nn::ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  const nn::NetConfig config = read_header(f);
  nn::ModelParams params = nn::make_params(config);
  auto tensors = params.tensors();
  std::map<std::string, Mat*> by_name;
  for (auto& [name, m] : tensors) by_name[name] = m;

  const std::uint32_t count = get_u32(f);
  if (count != tensors.size())
    throw std::runtime_error("checkpoint: tensor count " + std::to_string(count) +
                             " does not match config (" + std::to_string(tensors.size()) + ")");
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = get_u32(f);
    if (name_len > 4096) throw std::runtime_error("checkpoint: implausible tensor name length");
    std::string name(name_len, '\0');
    if (!f.read(name.data(), name_len)) throw std::runtime_error("checkpoint: truncated file");
    const std::uint32_t rank = get_u32(f);
    if (rank != 2) throw std::runtime_error("checkpoint: unsupported tensor rank");
    const std::uint32_t rows = get_u32(f);
    const std::uint32_t cols = get_u32(f);
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("checkpoint: unknown tensor " + name);
    Mat& m = *it->second;
    if (m.rows() != static_cast<long>(rows) || m.cols() != static_cast<long>(cols))
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t col = 0; col < cols; ++col) m(r, col) = get_f64(f);
  }
  return params;
}

std::string describe_checkpoint(const std::string& path) {
  const nn::ModelParams params = load_checkpoint(path);
  const nn::NetConfig& c = params.config;
  std::ostringstream out;
  out << "d=" << c.d << " gcn_layers=" << c.gcn_layers << " logit_clip=" << c.logit_clip
      << " use_gcn=" << c.use_gcn << " use_lstm=" << c.use_lstm
      << " use_bidirectional=" << c.use_bidirectional
      << " use_best_solution=" << c.use_best_solution << " share_encoders=" << c.share_encoders
      << "\n";
  long total = 0;
  params.visit([&](const std::string& name, const Mat& m) {
    out << "  " << name << "  " << m.rows() << "x" << m.cols() << "\n";
    total += m.size();
  });
  out << "total parameters: " << total << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Policy evaluation
// ---------------------------------------------------------------------------

Move uniform_random_move(std::mt19937_64& rng, int n) {
  int r = rand_below(rng, n * (n - 1) / 2);
  for (int i = 0; i < n - 1; ++i) {
    const int fan = n - 1 - i;
    if (r < fan) return Move{i, i + 1 + r};
    r -= fan;
  }
  throw std::logic_error("uniform_random_move: unreachable");
}

namespace {

template <typename MovePicker>
EvalResult roll_instance(const Instance& inst, int steps, const Tour* start,
                         std::mt19937_64& reset_rng, MovePicker&& pick) {
  rl::EnvConfig env;
  env.total_steps = steps;
  env.episode_length = steps;
  env.reward_clip.reset();
  rl::SearchState state;
  if (start) {
    state.current = *start;
    state.best = *start;
  } else {
    state = rl::reset(inst, reset_rng);
  }
  EvalResult res;
  res.best_cost = state.best.length;
  res.best_step = 0;
  res.best_order = state.best.order;
  res.best_trace.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    const Move move = pick(state, t);
    auto [next, reward] = rl::step(state, move, inst, env);
    state = std::move(next);
    if (state.best.length < res.best_cost) {
      res.best_cost = state.best.length;
      res.best_step = t + 1;
      res.best_order = state.best.order;
    }
    res.best_trace.push_back(state.best.length);
  }
  return res;
}

}  // namespace

std::vector<EvalResult> evaluate_policy(const nn::ModelParams& params,
                                        const std::vector<Instance>& instances,
                                        const EvalOptions& options) {
  if (options.steps < 1) throw std::invalid_argument("evaluate_policy: steps must be >= 1");
  if (options.initial_tours && options.initial_tours->size() != instances.size())
    throw std::invalid_argument("evaluate_policy: initial tour count mismatch");
  std::vector<EvalResult> results(instances.size());
  parallel_for(static_cast<int>(instances.size()), options.threads, [&](int i) {
    const Instance& inst = instances[static_cast<std::size_t>(i)];
    std::mt19937_64 reset_rng(derive_seed(options.seed, static_cast<std::uint64_t>(i), 0));
    std::mt19937_64 action_rng(derive_seed(options.seed, static_cast<std::uint64_t>(i), 1));
    ad::Tape tape;
    const nn::BoundParams bound = nn::bind(tape, params, /*trainable=*/false);
    const std::size_t watermark = tape.mark();
    const Tour* start =
        options.initial_tours ? &(*options.initial_tours)[static_cast<std::size_t>(i)] : nullptr;
    results[static_cast<std::size_t>(i)] =
        roll_instance(inst, options.steps, start, reset_rng, [&](const rl::SearchState& state, int) {
          tape.rewind(watermark);
          const nn::StateEncoding enc = nn::encode_state(tape, inst, state, bound);
          return nn::policy_decode(tape, enc, bound, action_rng, options.mode).move;
        });
  });
  return results;
}

std::vector<EvalResult> evaluate_random_policy(const std::vector<Instance>& instances,
                                               const EvalOptions& options) {
  if (options.steps < 1) throw std::invalid_argument("evaluate_random_policy: steps must be >= 1");
  if (options.initial_tours && options.initial_tours->size() != instances.size())
    throw std::invalid_argument("evaluate_random_policy: initial tour count mismatch");
  std::vector<EvalResult> results(instances.size());
  parallel_for(static_cast<int>(instances.size()), options.threads, [&](int i) {
    const Instance& inst = instances[static_cast<std::size_t>(i)];
    std::mt19937_64 reset_rng(derive_seed(options.seed, static_cast<std::uint64_t>(i), 0));
    std::mt19937_64 action_rng(derive_seed(options.seed, static_cast<std::uint64_t>(i), 1));
    const Tour* start =
        options.initial_tours ? &(*options.initial_tours)[static_cast<std::size_t>(i)] : nullptr;
    results[static_cast<std::size_t>(i)] =
        roll_instance(inst, options.steps, start, reset_rng, [&](const rl::SearchState&, int) {
          return uniform_random_move(action_rng, inst.n());
        });
  });
  return results;
}

// ---------------------------------------------------------------------------
// Benchmark harness
// ---------------------------------------------------------------------------

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& config, const StartObserver& observer) {
  if (config.methods.empty()) throw std::invalid_argument("run_benchmark: no methods given");
  const std::vector<Instance> instances =
      generate_instances(config.n, config.count, config.instance_seed);

  // Shared initial tours: every improvement method starts from the same
  // solutions.
  std::vector<Tour> starts;
  starts.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    std::mt19937_64 rng(derive_seed(config.eval_seed, i, 0xa5a5));
    starts.push_back(random_tour(instances[i], rng));
  }

  BenchmarkReport report;
  report.config = config;
  std::vector<double> oracle_costs;
  // Per-instance costs per row, kept so gap means can be taken per instance
  // once the oracle row is known.
  std::vector<std::vector<double>> row_costs;

  auto run_method = [&](const std::string& method) {
    BenchmarkRow row;
    row.method = method;
    std::vector<double> costs(instances.size());
    const double t0 = now_s();
    if (method == "nearest" || method == "farthest" || method == "random") {
      parallel_for(static_cast<int>(instances.size()), config.threads, [&](int i) {
        const Instance& inst = instances[static_cast<std::size_t>(i)];
        Tour t;
        if (method == "nearest") t = nearest_insertion(inst);
        else if (method == "farthest") t = farthest_insertion(inst);
        else t = random_insertion(inst, derive_seed(config.eval_seed, static_cast<std::uint64_t>(i), 0x9a0d));
        costs[static_cast<std::size_t>(i)] = t.length;
      });
    } else if (method == "fi" || method == "bi" || method == "fi+restarts" ||
               method == "bi+restarts") {
      const bool restarts = method.ends_with("+restarts");
      const PivotRule rule =
          method.starts_with("fi") ? PivotRule::FirstImprovement : PivotRule::BestImprovement;
      if (observer)
        for (std::size_t i = 0; i < starts.size(); ++i)
          observer(method, static_cast<int>(i), starts[i]);
      parallel_for(static_cast<int>(instances.size()), config.threads, [&](int i) {
        LocalSearchConfig ls;
        ls.rule = rule;
        ls.restarts = restarts;
        ls.max_steps = config.steps;
        ls.rng_seed = derive_seed(config.eval_seed, static_cast<std::uint64_t>(i), 0x2e57);
        costs[static_cast<std::size_t>(i)] =
            local_search_2opt(instances[static_cast<std::size_t>(i)],
                              starts[static_cast<std::size_t>(i)], ls)
                .best.length;
      });
      row.steps = config.steps;
    } else if (method.starts_with("policy:")) {
      const std::string path = method.substr(7);
      const nn::ModelParams params = load_checkpoint(path);
      if (observer)
        for (std::size_t i = 0; i < starts.size(); ++i)
          observer(method, static_cast<int>(i), starts[i]);
      EvalOptions opts;
      opts.steps = config.steps;
      opts.mode = nn::DecodeMode::Sample;
      opts.seed = derive_seed(config.eval_seed, 0x90 + 7);
      opts.threads = config.threads;
      opts.initial_tours = &starts;
      const auto results = evaluate_policy(params, instances, opts);
      for (std::size_t i = 0; i < results.size(); ++i) costs[i] = results[i].best_cost;
      row.steps = config.steps;
    } else if (method == "held-karp") {
      if (config.n > config.oracle_cap) {
        row.note = "refused: n=" + std::to_string(config.n) + " exceeds oracle cap " +
                   std::to_string(config.oracle_cap);
        row.wallclock_s = config.timing ? now_s() - t0 : 0.0;
        report.rows.push_back(row);
        row_costs.emplace_back();
        return;
      }
      parallel_for(static_cast<int>(instances.size()), config.threads, [&](int i) {
        costs[static_cast<std::size_t>(i)] =
            held_karp(instances[static_cast<std::size_t>(i)], config.oracle_cap).length;
      });
      oracle_costs = costs;
    } else {
      throw std::invalid_argument("run_benchmark: unknown method '" + method + "'");
    }
    double mean = 0.0;
    for (double c : costs) mean += c;
    row.mean_cost = mean / static_cast<double>(costs.size());
    row.wallclock_s = config.timing ? now_s() - t0 : 0.0;
    report.rows.push_back(row);
    row_costs.push_back(std::move(costs));
  };

  for (const std::string& method : config.methods) run_method(method);

  // Mean of per-instance gaps, available once the oracle ran on the set.
  if (!oracle_costs.empty()) {
    for (std::size_t r = 0; r < report.rows.size(); ++r) {
      if (row_costs[r].empty()) continue;
      double gap = 0.0;
      for (std::size_t i = 0; i < oracle_costs.size(); ++i)
        gap += optimality_gap(row_costs[r][i], oracle_costs[i]);
      report.rows[r].mean_gap_pct = gap / static_cast<double>(oracle_costs.size());
    }
  }
  return report;
}

std::string report_to_csv(const BenchmarkReport& report) {
  std::ostringstream out;
  const BenchmarkConfig& c = report.config;
  out << "# opt2rl-bench n=" << c.n << " count=" << c.count << " instance_seed=" << c.instance_seed
      << " eval_seed=" << c.eval_seed << " steps=" << c.steps << "\n";
  out << "method,mean_cost,mean_gap_pct,steps,wallclock_s,note\n";
  for (const BenchmarkRow& row : report.rows) {
    out << row.method << ',';
    if (!std::isnan(row.mean_cost)) out << format_g6(row.mean_cost);
    out << ',';
    if (row.mean_gap_pct) out << format_g6(*row.mean_gap_pct);
    out << ',' << row.steps << ',' << format_g6(row.wallclock_s) << ',' << row.note << '\n';
  }
  return out.str();
}

BenchmarkReport report_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  BenchmarkReport report;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.starts_with("#")) {
      std::istringstream ls(line);
      std::string tok;
      while (ls >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string value = tok.substr(eq + 1);
        if (key == "n") report.config.n = std::stoi(value);
        else if (key == "count") report.config.count = std::stoi(value);
        else if (key == "instance_seed") report.config.instance_seed = std::stoull(value);
        else if (key == "eval_seed") report.config.eval_seed = std::stoull(value);
        else if (key == "steps") report.config.steps = std::stoi(value);
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // column header line
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    while (fields.size() < 6) fields.emplace_back();
    BenchmarkRow row;
    row.method = fields[0];
    row.mean_cost =
        fields[1].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(fields[1]);
    if (!fields[2].empty()) row.mean_gap_pct = std::stod(fields[2]);
    row.steps = fields[3].empty() ? 0 : std::stoi(fields[3]);
    row.wallclock_s = fields[4].empty() ? 0.0 : std::stod(fields[4]);
    row.note = fields[5];
    report.rows.push_back(std::move(row));
    report.config.methods.push_back(report.rows.back().method);
  }
  return report;
}

std::string report_to_table(const BenchmarkReport& report) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-16s %12s %12s %8s %12s  %s\n", "method", "mean_cost",
                "gap_pct", "steps", "wallclock_s", "note");
  out << buf;
  for (const BenchmarkRow& row : report.rows) {
    const std::string cost = std::isnan(row.mean_cost) ? "-" : format_g6(row.mean_cost);
    const std::string gap = row.mean_gap_pct ? format_g6(*row.mean_gap_pct) : "-";
    std::snprintf(buf, sizeof(buf), "%-16s %12s %12s %8d %12s  %s\n", row.method.c_str(),
                  cost.c_str(), gap.c_str(), row.steps, format_g6(row.wallclock_s).c_str(),
                  row.note.c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace opt2rl::io
