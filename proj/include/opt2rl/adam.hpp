#pragma once

#include <Eigen/Core>
#include <vector>

namespace opt2rl::ad {

// First/second-moment buffers, one slot per parameter tensor.
struct AdamState {
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;
  long t = 0;
};

// Bias-corrected Adam update. Weight decay is the additive l2 gradient term
// g + wd * theta (not the decoupled variant).
void adam_step(const std::vector<Eigen::MatrixXd*>& params,
               const std::vector<const Eigen::MatrixXd*>& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
               double weight_decay = 0.0);

}  // namespace opt2rl::ad
