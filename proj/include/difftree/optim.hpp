#pragma once

#include <Eigen/Dense>

#include "difftree/model.hpp"

namespace difftree {

enum class OptimizerKind { Adam, QhAdam };

// Adam runs with betas (0.9, 0.999); QHAdam with (0.995, 0.999), nu1 = 0.7
// and nu2 = 1, the cited defaults. Both use eps = 1e-8 and bias correction.
struct Optimizer {
  explicit Optimizer(OptimizerKind kind, Eigen::Index size);

  // params <- params - lr * direction(grads); state updated in place.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, double lr);

  OptimizerKind kind;
  double beta1;
  double beta2 = 0.999;
  double nu1 = 0.7;
  double eps = 1e-8;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step_count = 0;
};

// Flat views over all trainable parameters, in a fixed order (split weights
// row-major, split bias, then each predictor layer's weight and bias).
Eigen::VectorXd pack_params(const SplitParams& split,
                            const PredictorParams& pred);
void unpack_params(const Eigen::VectorXd& flat, SplitParams& split,
                   PredictorParams& pred);
Eigen::VectorXd pack_grads(const Eigen::MatrixXd& grad_w,
                           const Eigen::VectorXd& grad_b,
                           const std::vector<DenseLayer>& layer_grads);

}  // namespace difftree
