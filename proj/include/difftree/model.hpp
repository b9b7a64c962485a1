#pragma once

#include <Eigen/Dense>
#include <random>
#include <utility>
#include <vector>

#include "difftree/tree.hpp"

namespace difftree {

enum class Activation { Identity, Elu };

double apply_activation(Activation act, double x);

// One parameter row per branching node: s_t(x) = act(w_t . x) + b_t.
struct SplitParams {
  Eigen::MatrixXd weights;  // |T_B| x d
  Eigen::VectorXd bias;     // |T_B|
  Activation activation = Activation::Identity;
};

SplitParams make_split_params(const TreeTopology& tree, int feature_dim,
                              Activation act, std::mt19937_64& rng);

// n x |T_B| matrix of split values.
Eigen::MatrixXd split_forward(const SplitParams& params,
                              const Eigen::MatrixXd& X);

// Accumulates gradients of the split values onto (weights, bias).
void split_backward(const SplitParams& params, const Eigen::MatrixXd& X,
                    const Eigen::MatrixXd& grad_s, Eigen::MatrixXd& grad_w,
                    Eigen::VectorXd& grad_b);

// Sets each bias to minus the mean pre-bias split value over the training
// points reaching the node, walking levels from the root so that every node
// sees the splits induced by the biases already set above it. Nodes reached
// by no point keep bias 0. Weights are untouched.
void init_bias(SplitParams& params, const Eigen::MatrixXd& X,
               const TreeTopology& tree);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Linear map (single layer) or MLP with ELU hidden activations and inverted
// dropout after every hidden activation. Input is [x ; z] when concat_x is
// set, z alone otherwise.
struct PredictorParams {
  std::vector<DenseLayer> layers;
  double dropout = 0.0;
  bool concat_x = true;

  int input_width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
  }
  int output_width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
  }
};

// hidden_layers counts layers before the output map; 0 gives a linear model.
PredictorParams make_predictor(int input_width, int output_width,
                               int hidden_layers, int hidden_width,
                               double dropout, bool concat_x,
                               std::mt19937_64& rng);

struct PredictorCache {
  std::vector<Eigen::MatrixXd> inputs;    // input to each layer
  std::vector<Eigen::MatrixXd> preacts;   // pre-activation of hidden layers
  std::vector<Eigen::MatrixXd> masks;     // dropout masks (scaled), hidden layers
  Eigen::Index z_cols = 0;
};

// rng is only consulted when train_mode && dropout > 0; cache may be null.
Eigen::MatrixXd predictor_forward(const PredictorParams& params,
                                  const Eigen::MatrixXd& X,
                                  const Eigen::MatrixXd& Z, bool train_mode,
                                  std::mt19937_64* rng,
                                  PredictorCache* cache = nullptr);

// Returns the gradient w.r.t. Z; fills per-layer parameter gradients.
Eigen::MatrixXd predictor_backward(const PredictorParams& params,
                                   const PredictorCache& cache,
                                   const Eigen::MatrixXd& grad_out,
                                   std::vector<DenseLayer>& grads);

enum class LossKind { Mse, Bce };

// MSE: mean over points of the squared error, gradient 2(out - y)/n.
// BCE: mean logistic loss on logits with {0,1} targets, gradient (sigma - y)/n.
std::pair<double, Eigen::MatrixXd> loss_and_grad(LossKind kind,
                                                 const Eigen::MatrixXd& outputs,
                                                 const Eigen::MatrixXd& targets);

}  // namespace difftree
