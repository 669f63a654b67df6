#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "opt2rl/bench.hpp"
#include "opt2rl/exact.hpp"
#include "opt2rl/heuristics.hpp"
#include "opt2rl/rng.hpp"

using namespace opt2rl;

namespace {

std::string data_path(const std::string& name) {
  return std::string(OPT2RL_TEST_DATA_DIR) + "/" + name;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

const char* kSquareTsp =
    "NAME : square10\n"
    "TYPE : TSP\n"
    "DIMENSION : 4\n"
    "EDGE_WEIGHT_TYPE : EUC_2D\n"
    "NODE_COORD_SECTION\n"
    "1 0 0\n"
    "2 0 10\n"
    "3 10 10\n"
    "4 10 0\n"
    "EOF\n";

}  // namespace

TEST_CASE("generate_instances: deterministic, in range, centered") {
  const auto a = io::generate_instances(10, 5, 77);
  const auto b = io::generate_instances(10, 5, 77);
  for (int k = 0; k < 5; ++k) CHECK(a[static_cast<std::size_t>(k)].coords == b[static_cast<std::size_t>(k)].coords);

  const auto big = io::generate_instances(10, 5000, 78);
  double mean = 0.0;
  long count = 0;
  for (const auto& inst : big) {
    CHECK(inst.coords.minCoeff() >= 0.0);
    CHECK(inst.coords.maxCoeff() < 1.0);
    mean += inst.coords.sum();
    count += inst.coords.size();
  }
  mean /= static_cast<double>(count);
  // 1e5 draws: se = sqrt(1/12)/sqrt(1e5)
  const double se = std::sqrt(1.0 / 12.0) / std::sqrt(static_cast<double>(count));
  CHECK(std::abs(mean - 0.5) < 4.0 * se);
}

TEST_CASE("tsplib: crafted square parses with rounded perimeter 40") {
  const io::TsplibInstance t = io::parse_tsplib(kSquareTsp);
  CHECK(t.name == "square10");
  CHECK(t.dimension == 4);
  CHECK(tour_cost(t.rounded_dist, {0, 1, 2, 3}) == doctest::Approx(40.0));
  // scaled copy spans the unit square
  CHECK(t.scaled.coords.minCoeff() == 0.0);
  CHECK(t.scaled.coords.maxCoeff() == 1.0);
}

TEST_CASE("tsplib: unsupported edge weight type is rejected") {
  CHECK_THROWS_WITH_AS(
      io::parse_tsplib("NAME : x\nDIMENSION : 4\nEDGE_WEIGHT_TYPE : GEO\n"
                       "NODE_COORD_SECTION\n1 0 0\n2 0 1\n3 1 1\n4 1 0\nEOF\n"),
      doctest::Contains("EDGE_WEIGHT_TYPE"), std::invalid_argument);
}

TEST_CASE("tsplib: malformed coordinate lines report the line number") {
  CHECK_THROWS_WITH_AS(
      io::parse_tsplib("DIMENSION : 4\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n"
                       "1 0 0\n2 zero one\n3 1 1\n4 1 0\nEOF\n"),
      doctest::Contains("line 5"), std::invalid_argument);
}

TEST_CASE("tsplib: eil51 and berlin52 load with their published optima") {
  const io::TsplibInstance eil = io::load_tsplib_file(data_path("eil51.tsp"));
  CHECK(eil.dimension == 51);
  CHECK(io::tsplib_known_optimum(eil.name) == 426.0);
  const io::TsplibInstance berlin = io::load_tsplib_file(data_path("berlin52.tsp"));
  CHECK(berlin.dimension == 52);
  CHECK(io::tsplib_known_optimum(berlin.name) == 7542.0);
  CHECK_FALSE(io::tsplib_known_optimum("nosuch").has_value());

  // aspect-preserving scaling: the longer axis spans exactly [0,1]
  for (const auto* t : {&eil, &berlin}) {
    const double xspan =
        t->scaled.coords.row(0).maxCoeff() - t->scaled.coords.row(0).minCoeff();
    const double yspan =
        t->scaled.coords.row(1).maxCoeff() - t->scaled.coords.row(1).minCoeff();
    CHECK(std::max(xspan, yspan) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t->scaled.coords.minCoeff() >= 0.0);
    CHECK(t->scaled.coords.maxCoeff() <= 1.0);
    const double ox = t->original_coords.row(0).maxCoeff() - t->original_coords.row(0).minCoeff();
    const double oy = t->original_coords.row(1).maxCoeff() - t->original_coords.row(1).minCoeff();
    CHECK(xspan / yspan == doctest::Approx(ox / oy).epsilon(1e-9));
  }
}

TEST_CASE("checkpoint: save/load round-trip is bitwise exact") {
  nn::NetConfig c;
  c.d = 16;
  c.gcn_layers = 2;
  const nn::ModelParams p = nn::init_params(c, 5);
  const std::string path = temp_path("opt2rl_ckpt_roundtrip.o2rl");
  io::save_checkpoint(p, path);
  const nn::ModelParams q = io::load_checkpoint(path);
  const auto ta = p.tensors();
  const auto tb = q.tensors();
  REQUIRE(ta.size() == tb.size());
  for (std::size_t k = 0; k < ta.size(); ++k) {
    CHECK(ta[k].first == tb[k].first);
    REQUIRE(ta[k].second->size() == tb[k].second->size());
    CHECK(std::memcmp(ta[k].second->data(), tb[k].second->data(),
                      sizeof(double) * static_cast<std::size_t>(ta[k].second->size())) == 0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: ablation configs round-trip their tensor inventory") {
  nn::NetConfig c;
  c.d = 8;
  c.gcn_layers = 1;
  c.use_lstm = false;
  c.share_encoders = true;
  const nn::ModelParams p = nn::init_params(c, 6);
  const std::string path = temp_path("opt2rl_ckpt_ablation.o2rl");
  io::save_checkpoint(p, path);
  const nn::ModelParams q = io::load_checkpoint(path);
  CHECK(q.config.use_lstm == false);
  CHECK(q.config.share_encoders == true);
  CHECK(q.tensors().size() == p.tensors().size());
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: truncation and corruption are rejected") {
  nn::NetConfig c;
  c.d = 8;
  c.gcn_layers = 1;
  const nn::ModelParams p = nn::init_params(c, 7);
  const std::string path = temp_path("opt2rl_ckpt_trunc.o2rl");
  io::save_checkpoint(p, path);
  std::string blob;
  {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    blob = ss.str();
  }
  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, blob.size() / 2, blob.size() - 4}) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(blob.data(), static_cast<std::streamsize>(cut));
    f.close();
    CHECK_THROWS_AS(io::load_checkpoint(path), std::runtime_error);
  }
  // bad magic
  {
    std::string bad = blob;
    bad[0] = 'X';
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_WITH_AS(io::load_checkpoint(path), doctest::Contains("magic"), std::runtime_error);
  // future version
  {
    std::string bad = blob;
    bad[4] = 99;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_WITH_AS(io::load_checkpoint(path), doctest::Contains("version"), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint: a policy transfers across instance sizes") {
  nn::NetConfig c;
  c.d = 8;
  c.gcn_layers = 1;
  const nn::ModelParams p = nn::init_params(c, 8);
  const std::string path = temp_path("opt2rl_ckpt_transfer.o2rl");
  io::save_checkpoint(p, path);
  const nn::ModelParams q = io::load_checkpoint(path);
  // trained-at-n is not recorded anywhere: evaluate on a larger size directly
  const auto instances = io::generate_instances(50, 2, 9);
  io::EvalOptions opts;
  opts.steps = 3;
  opts.seed = 10;
  const auto results = io::evaluate_policy(q, instances, opts);
  CHECK(results.size() == 2);
  for (const auto& r : results) CHECK(std::isfinite(r.best_cost));
  std::filesystem::remove(path);
}

TEST_CASE("evaluate_policy: contract checks and monotone best trace") {
  nn::NetConfig c;
  c.d = 8;
  c.gcn_layers = 1;
  const nn::ModelParams p = nn::init_params(c, 11);
  const auto instances = io::generate_instances(8, 4, 12);
  io::EvalOptions opts;
  opts.steps = 0;
  CHECK_THROWS_AS(io::evaluate_policy(p, instances, opts), std::invalid_argument);
  opts.steps = 30;
  opts.seed = 13;
  const auto results = io::evaluate_policy(p, instances, opts);
  for (const auto& r : results) {
    for (std::size_t t = 1; t < r.best_trace.size(); ++t)
      CHECK(r.best_trace[t] <= r.best_trace[t - 1] + 1e-12);
    CHECK(r.best_cost == doctest::Approx(r.best_trace.back()));
    CHECK(r.best_step <= 30);
  }
  // determinism
  const auto again = io::evaluate_policy(p, instances, opts);
  for (std::size_t i = 0; i < results.size(); ++i) {
    CHECK(results[i].best_cost == again[i].best_cost);
    CHECK(results[i].best_order == again[i].best_order);
  }
}

TEST_CASE("evaluate_random_policy shares initial tours with evaluate_policy per seed") {
  nn::NetConfig c;
  c.d = 8;
  c.gcn_layers = 1;
  const nn::ModelParams p = nn::init_params(c, 21);
  const auto instances = io::generate_instances(8, 3, 22);
  io::EvalOptions opts;
  opts.steps = 1;
  opts.seed = 23;
  const auto a = io::evaluate_policy(p, instances, opts);
  const auto b = io::evaluate_random_policy(instances, opts);
  // with one step, the starting tour dominates the trace start
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a[i].best_trace[0] <= b[i].best_trace[0] + 2.0);  // same start => both <= start length
}

TEST_CASE("run_benchmark: oracle floor, shared starts, refusal, csv round-trip") {
  io::BenchmarkConfig cfg;
  cfg.n = 10;
  cfg.count = 24;
  cfg.instance_seed = 31;
  cfg.eval_seed = 32;
  cfg.steps = 60;
  cfg.methods = {"nearest", "random", "farthest", "fi", "bi+restarts", "held-karp"};
  cfg.threads = 2;
  cfg.timing = false;

  std::map<std::string, std::vector<std::vector<int>>> starts_seen;
  const io::BenchmarkReport report = io::run_benchmark(cfg, [&](const std::string& method, int i,
                                                                const Tour& t) {
    (void)i;
    starts_seen[method].push_back(t.order);
  });
  REQUIRE(report.rows.size() == cfg.methods.size());

  // improvement methods saw identical start tours
  REQUIRE(starts_seen.count("fi") == 1);
  REQUIRE(starts_seen.count("bi+restarts") == 1);
  CHECK(starts_seen["fi"] == starts_seen["bi+restarts"]);

  double oracle_mean = 0.0;
  for (const auto& row : report.rows)
    if (row.method == "held-karp") oracle_mean = row.mean_cost;
  for (const auto& row : report.rows) {
    CHECK(row.mean_cost >= oracle_mean - 1e-9);
    REQUIRE(row.mean_gap_pct.has_value());
    CHECK(*row.mean_gap_pct >= 0.0);
  }

  const std::string csv = io::report_to_csv(report);
  const io::BenchmarkReport parsed = io::report_from_csv(csv);
  CHECK(io::report_to_csv(parsed) == csv);

  // oracle refusal on big instances
  io::BenchmarkConfig big = cfg;
  big.n = 25;
  big.count = 2;
  big.methods = {"nearest", "held-karp"};
  const io::BenchmarkReport refused = io::run_benchmark(big);
  REQUIRE(refused.rows.size() == 2);
  CHECK(refused.rows[1].note.find("refused") != std::string::npos);
  CHECK(std::isnan(refused.rows[1].mean_cost));
  CHECK_FALSE(refused.rows[0].mean_gap_pct.has_value());
}

TEST_CASE("farthest insertion plus best improvement lands near the eil51 optimum") {
  const io::TsplibInstance eil = io::load_tsplib_file(data_path("eil51.tsp"));
  const Tour built = farthest_insertion(eil.scaled);
  LocalSearchConfig ls;
  ls.rule = PivotRule::BestImprovement;
  ls.max_steps = 100000;
  const LocalSearchResult res = local_search_2opt(eil.scaled, built, ls);
  const double rounded = tour_cost(eil.rounded_dist, res.best.order);
  CHECK(rounded <= 426.0 * 1.10);
  CHECK(rounded >= 426.0);  // cannot beat the optimum
}
