#include "opt2rl/tape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace opt2rl::ad {

namespace {

constexpr double kMaskValue = -1e30;

[[noreturn]] void shape_error(const char* op, const Mat& a, const Mat& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes (" +
                              std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                              ") and (" + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()) + ")");
}

}  // namespace

const Mat& Var::val() const { return tape->value(id); }
const Mat& Var::grad() const { return tape->grad_of(id); }
double Var::scalar() const {
  const Mat& v = val();
  if (v.rows() != 1 || v.cols() != 1) throw std::logic_error("scalar(): tensor is not 1x1");
  return v(0, 0);
}
long Var::rows() const { return val().rows(); }
long Var::cols() const { return val().cols(); }

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Mat& Tape::acc(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::leaf(Mat value, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return push(std::move(n));
}

Var Tape::constant_scalar(double v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Tape::matmul(Var a, Var b) {
  const Mat& av = a.val();
  const Mat& bv = b.val();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Node n;
  n.op = Op::MatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = av * bv;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Mat& av = a.val();
  const Mat& bv = b.val();
  Node n;
  n.a = a.id;
  n.b = b.id;
  n.requires_grad = needs(a.id) || needs(b.id);
  if (av.rows() == bv.rows() && av.cols() == bv.cols()) {
    n.op = Op::Add;
    n.value = av + bv;
  } else if (av.rows() == bv.rows() && bv.cols() == 1) {
    n.op = Op::AddBias;
    n.value = av.colwise() + bv.col(0);
  } else {
    shape_error("add", av, bv);
  }
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Mat& av = a.val();
  const Mat& bv = b.val();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("sub", av, bv);
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.value = av - bv;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::cmul(Var a, Var b) {
  const Mat& av = a.val();
  const Mat& bv = b.val();
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) shape_error("cmul", av, bv);
  Node n;
  n.op = Op::CMul;
  n.a = a.id;
  n.b = b.id;
  n.value = av.cwiseProduct(bv);
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  Node n;
  n.op = Op::Relu;
  n.a = a.id;
  n.value = a.val().cwiseMax(0.0);
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::Tanh;
  n.a = a.id;
  n.value = a.val().array().tanh().matrix();
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.a = a.id;
  n.value = (1.0 / (1.0 + (-a.val().array()).exp())).matrix();
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.s = s;
  n.value = a.val() * s;
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::square(Var a) {
  Node n;
  n.op = Op::Square;
  n.a = a.id;
  n.value = a.val().array().square().matrix();
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::Sum;
  n.a = a.id;
  n.value = Mat::Constant(1, 1, a.val().sum());
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::mean_cols(Var a) {
  Node n;
  n.op = Op::MeanCols;
  n.a = a.id;
  n.value = a.val().rowwise().mean();
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::max_cols(Var a) {
  const Mat& av = a.val();
  Node n;
  n.op = Op::MaxCols;
  n.a = a.id;
  n.value.resize(av.rows(), 1);
  n.indices.resize(static_cast<std::size_t>(av.rows()));
  for (long r = 0; r < av.rows(); ++r) {
    int best = 0;
    for (long c = 1; c < av.cols(); ++c)
      if (av(r, c) > av(r, best)) best = static_cast<int>(c);
    n.indices[static_cast<std::size_t>(r)] = best;
    n.value(r, 0) = av(r, best);
  }
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::col(Var a, int j) {
  const Mat& av = a.val();
  if (j < 0 || j >= av.cols()) throw std::invalid_argument("col: index out of range");
  Node n;
  n.op = Op::Col;
  n.a = a.id;
  n.i0 = j;
  n.value = av.col(j);
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::cols(Var a, int c0, int count) {
  const Mat& av = a.val();
  if (c0 < 0 || count < 0 || c0 + count > av.cols())
    throw std::invalid_argument("cols: block out of range");
  Node n;
  n.op = Op::Cols;
  n.a = a.id;
  n.i0 = c0;
  n.i1 = count;
  n.value = av.middleCols(c0, count);
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::rows(Var a, int r0, int count) {
  const Mat& av = a.val();
  if (r0 < 0 || count < 0 || r0 + count > av.rows())
    throw std::invalid_argument("rows: block out of range");
  Node n;
  n.op = Op::Rows;
  n.a = a.id;
  n.i0 = r0;
  n.i1 = count;
  n.value = av.middleRows(r0, count);
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty input");
  const long r = xs[0].rows();
  Node n;
  n.op = Op::ConcatCols;
  n.value.resize(r, static_cast<long>(xs.size()));
  n.parents.reserve(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const Mat& v = xs[k].val();
    if (v.rows() != r || v.cols() != 1) shape_error("concat_cols", xs[0].val(), v);
    n.value.col(static_cast<long>(k)) = v.col(0);
    n.parents.push_back(xs[k].id);
    n.requires_grad = n.requires_grad || needs(xs[k].id);
  }
  return push(std::move(n));
}

Var Tape::hconcat(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("hconcat: empty input");
  const long r = xs[0].rows();
  long total = 0;
  for (const Var& x : xs) {
    if (x.rows() != r) shape_error("hconcat", xs[0].val(), x.val());
    total += x.cols();
  }
  Node n;
  n.op = Op::HConcat;
  n.value.resize(r, total);
  n.parents.reserve(xs.size());
  n.indices.reserve(xs.size());
  long off = 0;
  for (const Var& x : xs) {
    n.value.middleCols(off, x.cols()) = x.val();
    n.parents.push_back(x.id);
    n.indices.push_back(static_cast<int>(off));
    n.requires_grad = n.requires_grad || needs(x.id);
    off += x.cols();
  }
  return push(std::move(n));
}

Var Tape::gather_cols(Var a, std::vector<int> indices) {
  const Mat& av = a.val();
  Node n;
  n.op = Op::GatherCols;
  n.a = a.id;
  n.value.resize(av.rows(), static_cast<long>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= av.cols())
      throw std::invalid_argument("gather_cols: index out of range");
    n.value.col(static_cast<long>(k)) = av.col(indices[k]);
  }
  n.indices = std::move(indices);
  n.requires_grad = needs(a.id);
  return push(std::move(n));
}

Var Tape::vconcat(Var a, Var b) {
  const Mat& av = a.val();
  const Mat& bv = b.val();
  if (av.cols() != bv.cols()) shape_error("vconcat", av, bv);
  Node n;
  n.op = Op::VConcat;
  n.a = a.id;
  n.b = b.id;
  n.i0 = static_cast<int>(av.rows());
  n.value.resize(av.rows() + bv.rows(), av.cols());
  n.value.topRows(av.rows()) = av;
  n.value.bottomRows(bv.rows()) = bv;
  n.requires_grad = needs(a.id) || needs(b.id);
  return push(std::move(n));
}

Var Tape::vtmul(Var v, Var m) {
  const Mat& vv = v.val();
  const Mat& mv = m.val();
  if (vv.cols() != 1 || vv.rows() != mv.rows()) shape_error("vtmul", vv, mv);
  Node n;
  n.op = Op::VtMul;
  n.a = v.id;
  n.b = m.id;
  n.value = mv.transpose() * vv;
  n.requires_grad = needs(v.id) || needs(m.id);
  return push(std::move(n));
}

Var Tape::softmax_masked(Var scores, std::vector<std::uint8_t> allowed) {
  const Mat& sv = scores.val();
  if (sv.cols() != 1) throw std::invalid_argument("softmax_masked: scores must be a column");
  if (allowed.size() != static_cast<std::size_t>(sv.rows()))
    throw std::invalid_argument("softmax_masked: mask length mismatch");
  // Additive -inf masking: masked scores sit at -1e30, so after the max
  // shift their exponentials underflow to exactly 0.
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (long j = 0; j < sv.rows(); ++j) {
    const double adj = sv(j, 0) + (allowed[static_cast<std::size_t>(j)] ? 0.0 : kMaskValue);
    if (adj > mx) mx = adj;
    any = any || allowed[static_cast<std::size_t>(j)];
  }
  if (!any) throw std::logic_error("softmax_masked: empty support (all positions masked)");
  Node n;
  n.op = Op::SoftmaxMasked;
  n.a = scores.id;
  n.value.resize(sv.rows(), 1);
  double z = 0.0;
  for (long j = 0; j < sv.rows(); ++j) {
    const double adj = sv(j, 0) + (allowed[static_cast<std::size_t>(j)] ? 0.0 : kMaskValue);
    const double e = std::exp(adj - mx);
    n.value(j, 0) = e;
    z += e;
  }
  n.value /= z;
  n.mask = std::move(allowed);
  n.requires_grad = needs(scores.id);
  return push(std::move(n));
}

Var Tape::log_pick(Var probs, int idx) {
  const Mat& pv = probs.val();
  if (pv.cols() != 1 || idx < 0 || idx >= pv.rows())
    throw std::invalid_argument("log_pick: index out of range");
  Node n;
  n.op = Op::LogPick;
  n.a = probs.id;
  n.i0 = idx;
  n.value = Mat::Constant(1, 1, std::log(pv(idx, 0)));
  n.requires_grad = needs(probs.id);
  return push(std::move(n));
}

Var Tape::entropy(Var probs) {
  const Mat& pv = probs.val();
  if (pv.cols() != 1) throw std::invalid_argument("entropy: probs must be a column");
  double h = 0.0;
  for (long j = 0; j < pv.rows(); ++j)
    if (pv(j, 0) > 0.0) h -= pv(j, 0) * std::log(pv(j, 0));
  Node n;
  n.op = Op::Entropy;
  n.a = probs.id;
  n.value = Mat::Constant(1, 1, h);
  n.requires_grad = needs(probs.id);
  return push(std::move(n));
}

void Tape::rewind(std::size_t mark) {
  if (mark > nodes_.size()) throw std::logic_error("rewind: mark beyond tape end");
  nodes_.resize(mark);
}

void Tape::backward(Var root) {
  if (root.tape != this) throw std::logic_error("backward: root from another tape");
  Node& r = nodes_[static_cast<std::size_t>(root.id)];
  if (r.value.rows() != 1 || r.value.cols() != 1)
    throw std::invalid_argument("backward: root must be a scalar (1x1)");
  acc(root.id).setConstant(1.0);

  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0 || !n.requires_grad) continue;
    const Mat& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::MatMul:
        if (needs(n.a)) acc(n.a).noalias() += g * nodes_[n.b].value.transpose();
        if (needs(n.b)) acc(n.b).noalias() += nodes_[n.a].value.transpose() * g;
        break;
      case Op::Add:
        if (needs(n.a)) acc(n.a) += g;
        if (needs(n.b)) acc(n.b) += g;
        break;
      case Op::AddBias:
        if (needs(n.a)) acc(n.a) += g;
        if (needs(n.b)) acc(n.b) += g.rowwise().sum();
        break;
      case Op::Sub:
        if (needs(n.a)) acc(n.a) += g;
        if (needs(n.b)) acc(n.b) -= g;
        break;
      case Op::CMul:
        if (needs(n.a)) acc(n.a) += g.cwiseProduct(nodes_[n.b].value);
        if (needs(n.b)) acc(n.b) += g.cwiseProduct(nodes_[n.a].value);
        break;
      case Op::Relu:
        if (needs(n.a))
          acc(n.a).array() += g.array() * (nodes_[n.a].value.array() > 0.0).cast<double>();
        break;
      case Op::Tanh:
        if (needs(n.a)) acc(n.a).array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::Sigmoid:
        if (needs(n.a))
          acc(n.a).array() += g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::Scale:
        if (needs(n.a)) acc(n.a) += n.s * g;
        break;
      case Op::Square:
        if (needs(n.a)) acc(n.a).array() += 2.0 * g.array() * nodes_[n.a].value.array();
        break;
      case Op::Sum:
        if (needs(n.a)) acc(n.a).array() += g(0, 0);
        break;
      case Op::MeanCols:
        if (needs(n.a)) {
          Mat& ga = acc(n.a);
          ga.colwise() += (g / static_cast<double>(ga.cols())).col(0);
        }
        break;
      case Op::MaxCols:
        if (needs(n.a)) {
          Mat& ga = acc(n.a);
          for (long r2 = 0; r2 < g.rows(); ++r2)
            ga(r2, n.indices[static_cast<std::size_t>(r2)]) += g(r2, 0);
        }
        break;
      case Op::Col:
        if (needs(n.a)) acc(n.a).col(n.i0) += g;
        break;
      case Op::Cols:
        if (needs(n.a)) acc(n.a).middleCols(n.i0, n.i1) += g;
        break;
      case Op::Rows:
        if (needs(n.a)) acc(n.a).middleRows(n.i0, n.i1) += g;
        break;
      case Op::ConcatCols:
        for (std::size_t k = 0; k < n.parents.size(); ++k)
          if (needs(n.parents[k])) acc(n.parents[k]) += g.col(static_cast<long>(k));
        break;
      case Op::HConcat:
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
          if (!needs(n.parents[k])) continue;
          Mat& ga = acc(n.parents[k]);
          ga += g.middleCols(n.indices[k], ga.cols());
        }
        break;
      case Op::GatherCols:
        if (needs(n.a)) {
          Mat& ga = acc(n.a);
          for (std::size_t k = 0; k < n.indices.size(); ++k)
            ga.col(n.indices[k]) += g.col(static_cast<long>(k));
        }
        break;
      case Op::VConcat:
        if (needs(n.a)) acc(n.a) += g.topRows(n.i0);
        if (needs(n.b)) acc(n.b) += g.bottomRows(g.rows() - n.i0);
        break;
      case Op::VtMul:
        // y = M^T v
        if (needs(n.a)) acc(n.a).noalias() += nodes_[n.b].value * g;
        if (needs(n.b)) acc(n.b).noalias() += nodes_[n.a].value * g.transpose();
        break;
      case Op::SoftmaxMasked:
        if (needs(n.a)) {
          const double dot = (n.value.array() * g.array()).sum();
          acc(n.a).array() += n.value.array() * (g.array() - dot);
        }
        break;
      case Op::LogPick:
        if (needs(n.a)) acc(n.a)(n.i0, 0) += g(0, 0) / nodes_[n.a].value(n.i0, 0);
        break;
      case Op::Entropy:
        if (needs(n.a)) {
          Mat& ga = acc(n.a);
          const Mat& p = nodes_[n.a].value;
          for (long j = 0; j < p.rows(); ++j)
            if (p(j, 0) > 0.0) ga(j, 0) -= g(0, 0) * (std::log(p(j, 0)) + 1.0);
        }
        break;
    }
  }
}

}  // namespace opt2rl::ad
