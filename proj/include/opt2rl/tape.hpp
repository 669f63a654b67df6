#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace opt2rl::ad {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a tape slot. Cheap to copy; valid until the tape is cleared or
// rewound past it.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat& val() const;
  const Mat& grad() const;  // zero-sized until backward touches it
  double scalar() const;    // value of a 1x1 tensor
  long rows() const;
  long cols() const;
};

// Reverse-mode tape over dense double matrices. Nodes are appended in
// topological order by construction; backward walks them in reverse and
// accumulates gradients additively at fan-out.
class Tape {
 public:
  Var leaf(Mat value, bool requires_grad = true);
  Var constant(Mat value) { return leaf(std::move(value), false); }
  Var constant_scalar(double v);

  Var matmul(Var a, Var b);
  // Same-shape addition, or broadcast of a column vector b across a's columns.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cmul(Var a, Var b);  // elementwise
  Var relu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var scale(Var a, double s);
  Var square(Var a);
  Var sum(Var a);        // 1x1
  Var mean_cols(Var a);  // m x 1
  Var max_cols(Var a);   // m x 1; gradient routes to the first argmax
  Var col(Var a, int j);
  Var cols(Var a, int c0, int count);
  Var rows(Var a, int r0, int count);
  Var concat_cols(const std::vector<Var>& xs);
  // General column-wise concatenation of same-height blocks.
  Var hconcat(const std::vector<Var>& xs);
  // Column gather: out.col(k) = a.col(indices[k]); backward scatters.
  Var gather_cols(Var a, std::vector<int> indices);
  Var vconcat(Var a, Var b);  // stack rows: (ma+mb) x n
  Var vtmul(Var v, Var m);    // m^T v: (d x 1, d x n) -> n x 1

  // Softmax over a column of scores with additive -inf masking (entries with
  // allowed[j] == 0 get exactly probability 0). Throws if nothing is allowed.
  Var softmax_masked(Var scores, std::vector<std::uint8_t> allowed);
  Var log_pick(Var probs, int idx);  // log(p[idx]), 1x1
  Var entropy(Var probs);            // -sum p log p over p > 0, 1x1

  // Seeds d(root)/d(root) = 1 and accumulates gradients into every
  // reachable node that requires them. Root must be 1x1.
  void backward(Var root);

  std::size_t mark() const { return nodes_.size(); }
  void rewind(std::size_t mark);
  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Mat& grad_of(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

 private:
  enum class Op : std::uint8_t {
    Leaf, MatMul, Add, AddBias, Sub, CMul, Relu, Tanh, Sigmoid, Scale, Square,
    Sum, MeanCols, MaxCols, Col, Cols, Rows, ConcatCols, HConcat, GatherCols,
    VConcat, VtMul, SoftmaxMasked, LogPick, Entropy,
  };

  struct Node {
    Op op = Op::Leaf;
    int a = -1, b = -1;
    int i0 = 0, i1 = 0;
    double s = 0.0;
    std::vector<int> parents;        // ConcatCols / HConcat
    std::vector<int> indices;        // HConcat offsets, GatherCols, MaxCols argmax
    std::vector<std::uint8_t> mask;  // SoftmaxMasked
    Mat value;
    Mat grad;
    bool requires_grad = false;
  };

  Var push(Node n);
  Mat& acc(int id);  // gradient buffer, zero-initialized on first touch
  bool needs(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  std::vector<Node> nodes_;
};

}  // namespace opt2rl::ad
