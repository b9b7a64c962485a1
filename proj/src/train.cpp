#include "difftree/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "difftree/errors.hpp"
#include "difftree/rewards.hpp"

namespace difftree {

namespace {

using json = nlohmann::json;

struct ChainResult {
  double loss = 0.0;
  double active_fraction = 0.0;
  Eigen::VectorXd grads;  // packed; empty when backward skipped
};

// One forward (and optionally backward) pass of the full chain on a batch.
ChainResult run_chain(const SplitParams& split, const PredictorParams& pred,
                      const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                      const TreeTopology& tree, const SolverConfig& solver_cfg,
                      LossKind loss_kind, bool train_mode,
                      std::mt19937_64* rng, bool with_grads) {
  const Eigen::MatrixXd s = split_forward(split, X);
  const RewardMatrix rewards = compute_rewards(s, tree);
  const TreeSolution sol = solve_tree_program(rewards.q, solver_cfg, tree);

  PredictorCache cache;
  const Eigen::MatrixXd out =
      predictor_forward(pred, X, sol.z, train_mode, rng,
                        with_grads ? &cache : nullptr);
  auto [loss, grad_out] = loss_and_grad(loss_kind, out, Y);

  ChainResult result;
  result.loss = loss;
  result.active_fraction =
      static_cast<double>((sol.a.array() > 0.0).count()) / sol.a.size();
  if (!with_grads) return result;

  std::vector<DenseLayer> pred_grads;
  const Eigen::MatrixXd grad_z =
      predictor_backward(pred, cache, grad_out, pred_grads);
  const Eigen::VectorXd grad_a = Eigen::VectorXd::Zero(tree.num_nodes());
  const Eigen::MatrixXd grad_q =
      solve_backward(sol, grad_z, grad_a, solver_cfg, tree);
  const Eigen::MatrixXd grad_s = rewards_backward(rewards, grad_q, tree);
  Eigen::MatrixXd grad_w;
  Eigen::VectorXd grad_b;
  split_backward(split, X, grad_s, grad_w, grad_b);
  result.grads = pack_grads(grad_w, grad_b, pred_grads);
  return result;
}

double chunked_eval_loss(const SplitParams& split, const PredictorParams& pred,
                         const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                         const TreeTopology& tree,
                         const SolverConfig& solver_cfg, LossKind loss_kind,
                         int cap) {
  const Eigen::Index n = X.rows();
  double weighted = 0.0;
  for (Eigen::Index start = 0; start < n; start += cap) {
    const Eigen::Index len = std::min<Eigen::Index>(cap, n - start);
    const ChainResult r = run_chain(
        split, pred, X.middleRows(start, len), Y.middleRows(start, len), tree,
        solver_cfg, loss_kind, /*train_mode=*/false, nullptr,
        /*with_grads=*/false);
    weighted += r.loss * static_cast<double>(len);
  }
  return weighted / static_cast<double>(n);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols =
      rows == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = j.at(r).at(c).get<double>();
    }
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("config.lambda", "lambda must be > 0");
  if (!(learning_rate > 0.0)) {
    throw ConfigError("config.learning_rate", "learning rate must be > 0");
  }
  if (batch_size < 1) throw ConfigError("config.batch_size", "batch size must be >= 1");
  if (patience < 1) throw ConfigError("config.patience", "patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("config.max_epochs", "max epochs must be >= 1");
  if (!(lr_decay_factor > 1.0)) {
    throw ConfigError("config.lr_decay_factor", "decay factor must be > 1");
  }
  if (lr_plateau_epochs < 1) {
    throw ConfigError("config.lr_plateau_epochs", "plateau window must be >= 1");
  }
  if (depth < 1) throw ConfigError("config.depth", "training needs depth >= 1");
}

TrainedModel train(const TrainData& data, const TrainConfig& config,
                   const MetricsSink& sink) {
  config.validate();
  if (data.x_train.rows() == 0 || data.x_val.rows() == 0) {
    throw ArgumentError("train.empty", "train and validation sets must be non-empty");
  }
  if (data.x_train.cols() != data.x_val.cols()) {
    throw ArgumentError("train.shape", "train/val feature widths differ");
  }

  const TreeTopology tree = TreeTopology::build(config.depth);
  const SolverConfig solver_cfg{config.lambda};
  const int d = static_cast<int>(data.x_train.cols());
  const int out_dim = static_cast<int>(data.y_train.cols());

  std::mt19937_64 rng(config.seed);
  SplitParams split =
      make_split_params(tree, d, config.split_activation, rng);
  init_bias(split, data.x_train, tree);
  const int pred_in =
      config.predictor.concat_x ? d + tree.num_nodes() : tree.num_nodes();
  PredictorParams pred = make_predictor(
      pred_in, out_dim, config.predictor.hidden_layers,
      config.predictor.hidden_width, config.predictor.dropout,
      config.predictor.concat_x, rng);

  Eigen::VectorXd params = pack_params(split, pred);
  Optimizer opt(config.optimizer, params.size());

  TrainedModel model;
  model.tree = tree;
  model.lambda = config.lambda;

  const Eigen::Index n = data.x_train.rows();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  double lr = config.learning_rate;
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params = params;
  int best_epoch = 0;
  int since_improve = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    double active_sum = 0.0;
    int batches = 0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index len =
          std::min<Eigen::Index>(config.batch_size, n - start);
      std::vector<int> rows(order.begin() + start, order.begin() + start + len);
      Eigen::MatrixXd xb(len, data.x_train.cols());
      Eigen::MatrixXd yb(len, data.y_train.cols());
      for (Eigen::Index i = 0; i < len; ++i) {
        xb.row(i) = data.x_train.row(rows[i]);
        yb.row(i) = data.y_train.row(rows[i]);
      }
      unpack_params(params, split, pred);
      const ChainResult r =
          run_chain(split, pred, xb, yb, tree, solver_cfg, config.loss,
                    /*train_mode=*/true, &rng, /*with_grads=*/true);
      if (!std::isfinite(r.loss)) {
        throw TrainingError("non-finite training loss", epoch, batches);
      }
      opt.step(params, r.grads, lr);
      loss_sum += r.loss * static_cast<double>(len);
      active_sum += r.active_fraction;
      ++batches;
    }

    unpack_params(params, split, pred);
    const double val_loss =
        chunked_eval_loss(split, pred, data.x_val, data.y_val, tree,
                          solver_cfg, config.loss, config.val_batch_cap);

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.val_loss = val_loss;
    stats.lr = lr;
    stats.active_node_fraction = active_sum / batches;
    stats.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    model.history.push_back(stats);
    if (sink) sink(stats);

    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = params;
      best_epoch = epoch;
      since_improve = 0;
    } else {
      ++since_improve;
      if (since_improve % config.lr_plateau_epochs == 0) {
        lr /= config.lr_decay_factor;
      }
      if (since_improve >= config.patience) break;
    }
  }

  unpack_params(best_params, split, pred);
  model.split = split;
  model.predictor = pred;
  model.best_epoch = best_epoch;

  // Freeze the pruning vector from a full-training-set solve at the
  // best-validation parameters.
  const Eigen::MatrixXd s = split_forward(split, data.x_train);
  const RewardMatrix rewards = compute_rewards(s, tree);
  model.a_frozen = solve_tree_program(rewards.q, solver_cfg, tree).a;
  return model;
}

InferResult infer(const TrainedModel& model, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd s = split_forward(model.split, X);
  const RewardMatrix rewards = compute_rewards(s, model.tree);
  InferResult result;
  result.z = project_traversals(rewards.q, model.a_frozen);
  result.outputs =
      predictor_forward(model.predictor, X, result.z, /*train_mode=*/false,
                        nullptr, nullptr);
  result.leaf_ids.resize(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int t = 1;
    while (!model.tree.is_leaf(t)) {
      t = s(i, t - 1) < 0.0 ? TreeTopology::left_child(t)
                            : TreeTopology::right_child(t);
    }
    result.leaf_ids[static_cast<size_t>(i)] = t;
  }
  return result;
}

InferResult infer_resolving(const TrainedModel& model,
                            const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd s = split_forward(model.split, X);
  const RewardMatrix rewards = compute_rewards(s, model.tree);
  const SolverConfig cfg{model.lambda};
  const TreeSolution sol = solve_tree_program(rewards.q, cfg, model.tree);
  InferResult result;
  result.z = sol.z;
  result.outputs =
      predictor_forward(model.predictor, X, result.z, /*train_mode=*/false,
                        nullptr, nullptr);
  result.leaf_ids.resize(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int t = 1;
    while (!model.tree.is_leaf(t)) {
      t = s(i, t - 1) < 0.0 ? TreeTopology::left_child(t)
                            : TreeTopology::right_child(t);
    }
    result.leaf_ids[static_cast<size_t>(i)] = t;
  }
  return result;
}

void save_checkpoint(const TrainedModel& model, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["kind"] = "difftree-model";
  j["depth"] = model.tree.depth();
  j["lambda"] = model.lambda;
  j["best_epoch"] = model.best_epoch;
  j["split"] = {
      {"activation",
       model.split.activation == Activation::Elu ? "elu" : "identity"},
      {"weights", matrix_to_json(model.split.weights)},
      {"bias", vector_to_json(model.split.bias)},
  };
  json layers = json::array();
  for (const DenseLayer& l : model.predictor.layers) {
    layers.push_back({{"weight", matrix_to_json(l.weight)},
                      {"bias", vector_to_json(l.bias)}});
  }
  j["predictor"] = {
      {"layers", std::move(layers)},
      {"dropout", model.predictor.dropout},
      {"concat_x", model.predictor.concat_x},
      {"dropout_placement", "after-every-hidden-activation"},
  };
  j["a_frozen"] = vector_to_json(model.a_frozen);
  j["stats"] = {{"mean", vector_to_json(model.stats.mean)},
                {"std", vector_to_json(model.stats.std)}};
  json history = json::array();
  for (const EpochStats& e : model.history) {
    history.push_back({{"epoch", e.epoch},
                       {"train_loss", e.train_loss},
                       {"val_loss", e.val_loss},
                       {"lr", e.lr},
                       {"active_node_fraction", e.active_node_fraction},
                       {"wall_ms", e.wall_ms}});
  }
  j["history"] = std::move(history);

  std::ofstream out(path);
  if (!out) {
    throw ArgumentError("io.write", "cannot write checkpoint to " + path);
  }
  out << j.dump(2) << "\n";
}

TrainedModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ArgumentError("io.read", "cannot read checkpoint from " + path);
  }
  json j = json::parse(in);
  if (j.value("format_version", 0) != 1 ||
      j.value("kind", "") != "difftree-model") {
    throw ArgumentError("io.format", "unrecognized checkpoint format");
  }
  TrainedModel model;
  model.tree = TreeTopology::build(j.at("depth").get<int>());
  model.lambda = j.at("lambda").get<double>();
  model.best_epoch = j.value("best_epoch", 0);
  model.split.activation =
      j.at("split").at("activation").get<std::string>() == "elu"
          ? Activation::Elu
          : Activation::Identity;
  model.split.weights = matrix_from_json(j.at("split").at("weights"));
  model.split.bias = vector_from_json(j.at("split").at("bias"));
  for (const json& l : j.at("predictor").at("layers")) {
    DenseLayer layer;
    layer.weight = matrix_from_json(l.at("weight"));
    layer.bias = vector_from_json(l.at("bias"));
    model.predictor.layers.push_back(std::move(layer));
  }
  model.predictor.dropout = j.at("predictor").at("dropout").get<double>();
  model.predictor.concat_x = j.at("predictor").at("concat_x").get<bool>();
  model.a_frozen = vector_from_json(j.at("a_frozen"));
  model.stats.mean = vector_from_json(j.at("stats").at("mean"));
  model.stats.std = vector_from_json(j.at("stats").at("std"));
  for (const json& e : j.at("history")) {
    EpochStats s;
    s.epoch = e.at("epoch").get<int>();
    s.train_loss = e.at("train_loss").get<double>();
    s.val_loss = e.at("val_loss").get<double>();
    s.lr = e.at("lr").get<double>();
    s.active_node_fraction = e.at("active_node_fraction").get<double>();
    s.wall_ms = e.at("wall_ms").get<double>();
    model.history.push_back(s);
  }
  return model;
}

}  // namespace difftree
