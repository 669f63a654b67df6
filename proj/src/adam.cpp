#include "opt2rl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace opt2rl::ad {

void adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<const Eigen::MatrixXd*>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps, double weight_decay) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: params/grads mismatch");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
      state.m[k] = Eigen::MatrixXd::Zero(params[k]->rows(), params[k]->cols());
      state.v[k] = Eigen::MatrixXd::Zero(params[k]->rows(), params[k]->cols());
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state size mismatch");
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Eigen::MatrixXd& p = *params[k];
    const Eigen::MatrixXd& raw = *grads[k];
    if (raw.rows() != p.rows() || raw.cols() != p.cols())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    Eigen::ArrayXXd g = raw.array() + weight_decay * p.array();
    state.m[k].array() = beta1 * state.m[k].array() + (1.0 - beta1) * g;
    state.v[k].array() = beta2 * state.v[k].array() + (1.0 - beta2) * g.square();
    p.array() -= lr * (state.m[k].array() / bc1) / ((state.v[k].array() / bc2).sqrt() + eps);
  }
}

}  // namespace opt2rl::ad
