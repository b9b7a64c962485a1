#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "difftree/data.hpp"
#include "difftree/model.hpp"
#include "difftree/optim.hpp"
#include "difftree/solver.hpp"
#include "difftree/tree.hpp"

namespace difftree {

struct PredictorSpec {
  int hidden_layers = 0;  // 0: linear predictor
  int hidden_width = 32;
  double dropout = 0.0;
  bool concat_x = true;  // false: predictor sees z only
};

struct TrainConfig {
  int depth = 4;
  double lambda = 1.0;
  double learning_rate = 1e-3;
  int batch_size = 512;
  int max_epochs = 100;
  int patience = 10;
  double lr_decay_factor = 10.0;
  int lr_plateau_epochs = 2;
  OptimizerKind optimizer = OptimizerKind::QhAdam;
  uint64_t seed = 0;
  LossKind loss = LossKind::Mse;
  Activation split_activation = Activation::Identity;
  PredictorSpec predictor;
  // Validation is solved as one batch; beyond this many rows it is chunked
  // and the chunk losses averaged.
  int val_batch_cap = 8192;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double active_node_fraction = 0.0;  // mean over the epoch's batch solves
  double wall_ms = 0.0;
};

struct TrainedModel {
  TreeTopology tree = TreeTopology::build(0);
  SplitParams split;
  PredictorParams predictor;
  Eigen::VectorXd a_frozen;
  double lambda = 1.0;
  Standardizer stats;  // filled by callers that preprocess
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

// Already-preprocessed training inputs. Targets are column matrices (one
// column for scalar regression / binary classification, k columns for
// multi-target regression).
struct TrainData {
  Eigen::MatrixXd x_train;
  Eigen::MatrixXd y_train;
  Eigen::MatrixXd x_val;
  Eigen::MatrixXd y_val;
};

using MetricsSink = std::function<void(const EpochStats&)>;

// Mini-batch learning with the tree program as a differentiable layer:
// split values -> rewards -> solve -> traversals -> predictor -> loss, with
// gradients routed back along the same chain. Bias initialization runs once
// on the full training set; the returned model holds the best-validation
// parameters and the pruning vector frozen from a final full-training-set
// solve at those parameters.
TrainedModel train(const TrainData& data, const TrainConfig& config,
                   const MetricsSink& sink = nullptr);

struct InferResult {
  Eigen::MatrixXd outputs;
  Eigen::MatrixXd z;
  std::vector<int> leaf_ids;  // hard routing, ties s = 0 go right
};

// Frozen-a inference: traversals are clipped against the stored pruning
// vector, no new solve. X must already be preprocessed with the model stats.
InferResult infer(const TrainedModel& model, const Eigen::MatrixXd& X);

// Comparison mode for the open test-time question: re-solves the tree
// program on this batch instead of using the frozen a.
InferResult infer_resolving(const TrainedModel& model, const Eigen::MatrixXd& X);

// Versioned JSON checkpoint with topology depth, split and predictor
// parameters, frozen a, preprocessing stats and training history.
void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace difftree
