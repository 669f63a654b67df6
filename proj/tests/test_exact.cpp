#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "opt2rl/exact.hpp"
#include "opt2rl/heuristics.hpp"
#include "opt2rl/rng.hpp"

using namespace opt2rl;

namespace {

Instance random_instance(int n, std::mt19937_64& rng) {
  Eigen::Matrix2Xd c(2, n);
  for (int i = 0; i < n; ++i) {
    c(0, i) = uniform01(rng);
    c(1, i) = uniform01(rng);
  }
  return make_instance(std::move(c));
}

Instance unit_square() {
  Eigen::Matrix2Xd c(2, 4);
  c << 0, 0, 1, 1, 0, 1, 1, 0;
  return make_instance(std::move(c));
}

}  // namespace

TEST_CASE("brute force solves the unit square") {
  const ExactResult res = brute_force(unit_square());
  CHECK(res.length == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("rhombus optimum is the perimeter, diagonals excluded") {
  Eigen::Matrix2Xd c(2, 4);
  // A, B, C, D around a flat rhombus; diagonals AC (long) and BD (short).
  c << 0, 1, 2, 1, 0, 0.3, 0, -0.3;
  const Instance inst = make_instance(std::move(c));
  const ExactResult res = brute_force(inst);
  const double perimeter = 4.0 * std::hypot(1.0, 0.3);
  CHECK(res.length == doctest::Approx(perimeter).epsilon(1e-12));
  // The optimal cycle visits the perimeter: neighbors of A are B and D.
  const auto& ord = res.tour.order;
  for (int k = 0; k < 4; ++k) {
    const int a = ord[k], b = ord[(k + 1) % 4];
    const bool diagonal = (a == 0 && b == 2) || (a == 2 && b == 0) || (a == 1 && b == 3) ||
                          (b == 1 && a == 3);
    CHECK_FALSE(diagonal);
  }
}

TEST_CASE("brute force refuses large instances") {
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(brute_force(random_instance(11, rng)), std::invalid_argument);
}

TEST_CASE("held-karp solves the unit square and refuses past its cap") {
  CHECK(held_karp(unit_square()).length == doctest::Approx(4.0).epsilon(1e-12));
  std::mt19937_64 rng(2);
  CHECK_THROWS_AS(held_karp(random_instance(12, rng), 10), std::invalid_argument);
}

TEST_CASE("held-karp agrees with brute force on n=8") {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 50; ++rep) {
    const Instance inst = random_instance(8, rng);
    const ExactResult bf = brute_force(inst);
    const ExactResult hk = held_karp(inst);
    CHECK(std::abs(bf.length - hk.length) < 1e-9);
    CHECK(std::abs(hk.tour.length - hk.length) < 1e-9);
  }
}

TEST_CASE("held-karp agrees with brute force on n=10") {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 50; ++rep) {
    const Instance inst = random_instance(10, rng);
    CHECK(std::abs(brute_force(inst).length - held_karp(inst).length) < 1e-9);
  }
}

TEST_CASE("held-karp is invariant under node relabeling") {
  std::mt19937_64 rng(9);
  const Instance inst = random_instance(9, rng);
  const double base = held_karp(inst).length;
  std::vector<int> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  for (int rep = 0; rep < 5; ++rep) {
    for (int i = 8; i > 0; --i) std::swap(perm[i], perm[rand_below(rng, i + 1)]);
    Eigen::Matrix2Xd c(2, 9);
    for (int i = 0; i < 9; ++i) c.col(i) = inst.coords.col(perm[i]);
    CHECK(held_karp(make_instance(std::move(c))).length == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("no heuristic beats the exact optimum") {
  std::mt19937_64 rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    const Instance inst = random_instance(12, rng);
    const double opt = held_karp(inst).length;
    CHECK(nearest_insertion(inst).length >= opt - 1e-9);
    CHECK(farthest_insertion(inst).length >= opt - 1e-9);
    CHECK(random_insertion(inst, rep).length >= opt - 1e-9);
  }
}

TEST_CASE("optimality gap arithmetic and contract") {
  CHECK(optimality_gap(3.84, 3.84) == doctest::Approx(0.0));
  CHECK(optimality_gap(4.33, 3.84) == doctest::Approx((4.33 / 3.84 - 1.0) * 100.0).epsilon(1e-12));
  CHECK(optimality_gap(4.33, 3.84) == doctest::Approx(12.7604).epsilon(1e-4));
  CHECK_THROWS_AS(optimality_gap(1.0 - 1e-6, 1.0), std::logic_error);
  CHECK_THROWS_AS(optimality_gap(1.0, 0.0), std::invalid_argument);
  // sub-tolerance undershoot clamps to zero
  CHECK(optimality_gap(1.0 - 1e-10, 1.0) == 0.0);
}
