#include "difftree/optim.hpp"

#include <cmath>

#include "difftree/errors.hpp"

namespace difftree {

Optimizer::Optimizer(OptimizerKind kind_, Eigen::Index size)
    : kind(kind_),
      beta1(kind_ == OptimizerKind::Adam ? 0.9 : 0.995),
      m(Eigen::VectorXd::Zero(size)),
      v(Eigen::VectorXd::Zero(size)) {}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                     double lr) {
  if (params.size() != m.size() || grads.size() != m.size()) {
    throw ArgumentError("optim.shape", "parameter/gradient size mismatch");
  }
  ++step_count;
  m = beta1 * m + (1.0 - beta1) * grads;
  v = beta2 * v + (1.0 - beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  const Eigen::VectorXd m_hat = m / bc1;
  const Eigen::VectorXd v_hat = v / bc2;
  Eigen::VectorXd numer;
  if (kind == OptimizerKind::Adam) {
    numer = m_hat;
  } else {
    numer = (1.0 - nu1) * grads + nu1 * m_hat;  // nu2 = 1: Adam denominator
  }
  params.array() -= lr * numer.array() / (v_hat.array().sqrt() + eps);
}

namespace {

void copy_in(Eigen::VectorXd& flat, Eigen::Index& pos,
             const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      flat(pos++) = m(r, c);
    }
  }
}

void copy_out(const Eigen::VectorXd& flat, Eigen::Index& pos,
              Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = flat(pos++);
    }
  }
}

Eigen::Index total_size(const SplitParams& split, const PredictorParams& pred) {
  Eigen::Index size = split.weights.size() + split.bias.size();
  for (const DenseLayer& l : pred.layers) {
    size += l.weight.size() + l.bias.size();
  }
  return size;
}

}  // namespace

Eigen::VectorXd pack_params(const SplitParams& split,
                            const PredictorParams& pred) {
  Eigen::VectorXd flat(total_size(split, pred));
  Eigen::Index pos = 0;
  copy_in(flat, pos, split.weights);
  for (Eigen::Index i = 0; i < split.bias.size(); ++i) flat(pos++) = split.bias(i);
  for (const DenseLayer& l : pred.layers) {
    copy_in(flat, pos, l.weight);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) flat(pos++) = l.bias(i);
  }
  return flat;
}

void unpack_params(const Eigen::VectorXd& flat, SplitParams& split,
                   PredictorParams& pred) {
  if (flat.size() != total_size(split, pred)) {
    throw ArgumentError("optim.shape", "flat parameter size mismatch");
  }
  Eigen::Index pos = 0;
  copy_out(flat, pos, split.weights);
  for (Eigen::Index i = 0; i < split.bias.size(); ++i) split.bias(i) = flat(pos++);
  for (DenseLayer& l : pred.layers) {
    copy_out(flat, pos, l.weight);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = flat(pos++);
  }
}

Eigen::VectorXd pack_grads(const Eigen::MatrixXd& grad_w,
                           const Eigen::VectorXd& grad_b,
                           const std::vector<DenseLayer>& layer_grads) {
  Eigen::Index size = grad_w.size() + grad_b.size();
  for (const DenseLayer& l : layer_grads) size += l.weight.size() + l.bias.size();
  Eigen::VectorXd flat(size);
  Eigen::Index pos = 0;
  copy_in(flat, pos, grad_w);
  for (Eigen::Index i = 0; i < grad_b.size(); ++i) flat(pos++) = grad_b(i);
  for (const DenseLayer& l : layer_grads) {
    copy_in(flat, pos, l.weight);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) flat(pos++) = l.bias(i);
  }
  return flat;
}

}  // namespace difftree
