#pragma once

#include <Eigen/Core>
#include <random>
#include <vector>

namespace opt2rl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Minimum number of nodes for which a 2-opt move with i < j can change the
// tour at all; smaller instances only admit rotations/reflections.
inline constexpr int kMinNodes = 4;

// A Euclidean TSP instance: node coordinates (column i = node i) plus the
// derived pairwise-distance and symmetric-normalized edge matrices.
struct Instance {
  Eigen::Matrix2Xd coords;
  Mat dist;
  Mat norm_edges;

  int n() const { return static_cast<int>(coords.cols()); }
};

// Tour positions i < j; the move reverses order[i..j] in place.
struct Move {
  int i = 0;
  int j = 0;
};

struct Tour {
  std::vector<int> order;  // permutation of {0,...,n-1}
  double length = 0.0;
};

Mat pairwise_distances(const Eigen::Matrix2Xd& coords);

// e~(i,j) = e(i,j) / sqrt(rowsum_i * colsum_j). Throws on a zero row sum
// (all nodes coincident with node i).
Mat normalize_edges(const Mat& dist);

Instance make_instance(Eigen::Matrix2Xd coords);

double tour_cost(const Mat& dist, const std::vector<int>& order);
double tour_cost(const Instance& inst, const std::vector<int>& order);

// Validates that `order` is a permutation and caches its cost.
Tour make_tour(const Instance& inst, std::vector<int> order);
Tour random_tour(const Instance& inst, std::mt19937_64& rng);

void check_move(const Move& m, int n);

// O(1) cost change of reversing positions i..j. The full-reversal move
// (0, n-1) removes and re-adds the same closing edge, so its delta is 0.
double two_opt_delta(const Instance& inst, const Tour& tour, const Move& m);

// Returns a new tour with positions i..j reversed; input is not modified.
Tour apply_move(const Tour& tour, const Move& m, const Instance& inst);

}  // namespace opt2rl
