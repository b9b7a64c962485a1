#include "difftree/model.hpp"

#include <cmath>
#include <string>

#include "difftree/errors.hpp"
#include "difftree/rewards.hpp"

namespace difftree {

double apply_activation(Activation act, double x) {
  if (act == Activation::Elu) {
    return x >= 0.0 ? x : std::expm1(x);
  }
  return x;
}

namespace {

inline double activation_grad(Activation act, double pre) {
  if (act == Activation::Elu) {
    return pre >= 0.0 ? 1.0 : std::exp(pre);
  }
  return 1.0;
}

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols,
                               double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = dist(rng);
    }
  }
  return m;
}

}  // namespace

SplitParams make_split_params(const TreeTopology& tree, int feature_dim,
                              Activation act, std::mt19937_64& rng) {
  if (feature_dim < 1) {
    throw ArgumentError("model.feature_dim", "feature dimension must be >= 1");
  }
  SplitParams p;
  p.activation = act;
  const double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  p.weights = uniform_matrix(tree.num_branching(), feature_dim, bound, rng);
  p.bias = Eigen::VectorXd::Zero(tree.num_branching());
  return p;
}

Eigen::MatrixXd split_forward(const SplitParams& params,
                              const Eigen::MatrixXd& X) {
  if (X.cols() != params.weights.cols()) {
    throw ArgumentError("model.shape",
                        "X has " + std::to_string(X.cols()) +
                            " features, split weights expect " +
                            std::to_string(params.weights.cols()));
  }
  Eigen::MatrixXd s = X * params.weights.transpose();
  if (params.activation == Activation::Elu) {
    s = s.unaryExpr([](double v) { return v >= 0.0 ? v : std::expm1(v); });
  }
  s.rowwise() += params.bias.transpose();
  return s;
}

void split_backward(const SplitParams& params, const Eigen::MatrixXd& X,
                    const Eigen::MatrixXd& grad_s, Eigen::MatrixXd& grad_w,
                    Eigen::VectorXd& grad_b) {
  if (grad_s.rows() != X.rows() || grad_s.cols() != params.weights.rows()) {
    throw ArgumentError("model.shape", "grad_s shape mismatch");
  }
  grad_b = grad_s.colwise().sum();
  Eigen::MatrixXd dpre = grad_s;
  if (params.activation == Activation::Elu) {
    const Eigen::MatrixXd pre = X * params.weights.transpose();
    dpre.array() *=
        pre.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : std::exp(v); })
            .array();
  }
  grad_w = dpre.transpose() * X;
}

void init_bias(SplitParams& params, const Eigen::MatrixXd& X,
               const TreeTopology& tree) {
  if (X.rows() == 0) {
    throw ArgumentError("model.empty", "bias initialization needs data");
  }
  if (tree.depth() < 1) return;
  params.bias.setZero();

  // Level by level: a node's reaching set depends only on strict ancestors,
  // whose biases are already in place.
  for (int level = 0; level < tree.depth(); ++level) {
    const Eigen::MatrixXd s = split_forward(params, X);
    const RewardMatrix rewards = compute_rewards(s, tree);
    const int lo = 1 << level;
    const int hi = (1 << (level + 1)) - 1;
    for (int t = lo; t <= hi; ++t) {
      double sum = 0.0;
      int count = 0;
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (rewards.q(i, t - 1) > 0.0) {
          sum += s(i, t - 1);  // bias still zero here: this is act(w_t . x_i)
          ++count;
        }
      }
      params.bias(t - 1) = count > 0 ? -sum / count : 0.0;
    }
  }
}

PredictorParams make_predictor(int input_width, int output_width,
                               int hidden_layers, int hidden_width,
                               double dropout, bool concat_x,
                               std::mt19937_64& rng) {
  if (input_width < 1 || output_width < 1) {
    throw ArgumentError("model.width", "predictor widths must be >= 1");
  }
  if (hidden_layers > 0 && hidden_width < 1) {
    throw ArgumentError("model.width", "hidden width must be >= 1");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("config.dropout", "dropout must be in [0, 1)");
  }
  PredictorParams p;
  p.dropout = dropout;
  p.concat_x = concat_x;
  int in = input_width;
  for (int l = 0; l < hidden_layers; ++l) {
    DenseLayer layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    layer.weight = uniform_matrix(hidden_width, in, bound, rng);
    layer.bias = Eigen::VectorXd::Zero(hidden_width);
    p.layers.push_back(std::move(layer));
    in = hidden_width;
  }
  DenseLayer out;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  out.weight = uniform_matrix(output_width, in, bound, rng);
  out.bias = Eigen::VectorXd::Zero(output_width);
  p.layers.push_back(std::move(out));
  return p;
}

Eigen::MatrixXd predictor_forward(const PredictorParams& params,
                                  const Eigen::MatrixXd& X,
                                  const Eigen::MatrixXd& Z, bool train_mode,
                                  std::mt19937_64* rng, PredictorCache* cache) {
  if (params.layers.empty()) {
    throw UsageError("predictor has no layers");
  }
  Eigen::MatrixXd in;
  if (params.concat_x) {
    if (X.rows() != Z.rows()) {
      throw ArgumentError("model.shape", "X and Z row counts differ");
    }
    in.resize(X.rows(), X.cols() + Z.cols());
    in << X, Z;
  } else {
    in = Z;
  }
  if (in.cols() != params.input_width()) {
    throw ArgumentError("model.shape",
                        "predictor expects input width " +
                            std::to_string(params.input_width()) + ", got " +
                            std::to_string(in.cols()));
  }

  const bool use_dropout = train_mode && params.dropout > 0.0;
  if (use_dropout && rng == nullptr) {
    throw UsageError("dropout requires a generator in train mode");
  }
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
    cache->masks.clear();
    cache->z_cols = Z.cols();
  }

  const size_t hidden = params.layers.size() - 1;
  Eigen::MatrixXd cur = std::move(in);
  for (size_t l = 0; l < hidden; ++l) {
    if (cache) cache->inputs.push_back(cur);
    Eigen::MatrixXd pre = cur * params.layers[l].weight.transpose();
    pre.rowwise() += params.layers[l].bias.transpose();
    if (cache) cache->preacts.push_back(pre);
    cur = pre.unaryExpr([](double v) { return v >= 0.0 ? v : std::expm1(v); });
    if (use_dropout) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double keep_scale = 1.0 / (1.0 - params.dropout);
      Eigen::MatrixXd mask(cur.rows(), cur.cols());
      for (Eigen::Index r = 0; r < cur.rows(); ++r) {
        for (Eigen::Index c = 0; c < cur.cols(); ++c) {
          mask(r, c) = unit(*rng) < params.dropout ? 0.0 : keep_scale;
        }
      }
      cur.array() *= mask.array();
      if (cache) cache->masks.push_back(std::move(mask));
    } else if (cache) {
      cache->masks.push_back(Eigen::MatrixXd::Ones(cur.rows(), cur.cols()));
    }
  }
  if (cache) cache->inputs.push_back(cur);
  Eigen::MatrixXd out = cur * params.layers.back().weight.transpose();
  out.rowwise() += params.layers.back().bias.transpose();
  return out;
}

Eigen::MatrixXd predictor_backward(const PredictorParams& params,
                                   const PredictorCache& cache,
                                   const Eigen::MatrixXd& grad_out,
                                   std::vector<DenseLayer>& grads) {
  const size_t L = params.layers.size();
  if (cache.inputs.size() != L) {
    throw UsageError("predictor cache does not match a forward call");
  }
  grads.resize(L);

  Eigen::MatrixXd delta = grad_out;
  for (size_t l = L; l-- > 0;) {
    grads[l].weight = delta.transpose() * cache.inputs[l];
    grads[l].bias = delta.colwise().sum();
    Eigen::MatrixXd din = delta * params.layers[l].weight;
    if (l == 0) {
      delta = std::move(din);
      break;
    }
    // Through dropout mask and ELU of the previous hidden layer.
    din.array() *= cache.masks[l - 1].array();
    din.array() *= cache.preacts[l - 1]
                       .unaryExpr([](double v) {
                         return v >= 0.0 ? 1.0 : std::exp(v);
                       })
                       .array();
    delta = std::move(din);
  }

  if (params.concat_x) {
    return delta.rightCols(cache.z_cols);
  }
  return delta;
}

std::pair<double, Eigen::MatrixXd> loss_and_grad(
    LossKind kind, const Eigen::MatrixXd& outputs,
    const Eigen::MatrixXd& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
    throw ArgumentError("loss.shape", "outputs and targets differ in shape");
  }
  const double n = static_cast<double>(outputs.rows());
  if (kind == LossKind::Mse) {
    const Eigen::MatrixXd diff = outputs - targets;
    return {diff.squaredNorm() / n, (2.0 / n) * diff};
  }
  // BCE on logits.
  double loss = 0.0;
  Eigen::MatrixXd grad(outputs.rows(), outputs.cols());
  for (Eigen::Index r = 0; r < outputs.rows(); ++r) {
    for (Eigen::Index c = 0; c < outputs.cols(); ++c) {
      const double y = targets(r, c);
      if (y != 0.0 && y != 1.0) {
        throw ArgumentError("loss.target", "BCE targets must be 0 or 1");
      }
      const double x = outputs(r, c);
      loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
      grad(r, c) = (1.0 / (1.0 + std::exp(-x)) - y) / n;
    }
  }
  return {loss / n, std::move(grad)};
}

}  // namespace difftree
