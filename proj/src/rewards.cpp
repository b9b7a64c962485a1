#include "difftree/rewards.hpp"

#include <limits>
#include <string>

#include "difftree/errors.hpp"

namespace difftree {

RewardMatrix compute_rewards(const Eigen::MatrixXd& splits,
                             const TreeTopology& tree) {
  if (tree.depth() < 1) {
    throw ArgumentError("rewards.depth", "reward computation needs depth >= 1");
  }
  if (splits.cols() != tree.num_branching()) {
    throw ArgumentError("rewards.shape",
                        "splits must have one column per branching node (" +
                            std::to_string(tree.num_branching()) + "), got " +
                            std::to_string(splits.cols()));
  }
  if (!splits.allFinite()) {
    throw NumericError("split values contain non-finite entries");
  }

  const Eigen::Index n = splits.rows();
  const int num_nodes = tree.num_nodes();
  RewardMatrix out;
  out.q.resize(n, num_nodes);
  out.argmin_node.setZero(n, num_nodes);
  out.argmin_sign.setZero(n, num_nodes);
  out.q.col(0).setOnes();  // q_root = 1 by convention

  // path_min carries the running minimum over strict-ancestor contributions,
  // +inf at the root (empty set). Children extend the parent's path by one
  // signed split term; ties keep the earlier (smaller-id) ancestor.
  Eigen::MatrixXd path_min(n, num_nodes);
  path_min.col(0).setConstant(std::numeric_limits<double>::infinity());

  for (int t = 2; t <= num_nodes; ++t) {
    const int p = TreeTopology::parent(t);
    const double sign = (t == TreeTopology::left_child(p)) ? -1.0 : 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double contrib = sign * splits(i, p - 1);
      const double up = path_min(i, p - 1);
      if (contrib < up) {
        path_min(i, t - 1) = contrib;
        out.argmin_node(i, t - 1) = p;
        out.argmin_sign(i, t - 1) = static_cast<signed char>(sign);
      } else {
        path_min(i, t - 1) = up;
        out.argmin_node(i, t - 1) = out.argmin_node(i, p - 1);
        out.argmin_sign(i, t - 1) = out.argmin_sign(i, p - 1);
      }
    }
  }
  out.q.rightCols(num_nodes - 1) = path_min.rightCols(num_nodes - 1);
  return out;
}

Eigen::MatrixXd rewards_backward(const RewardMatrix& rewards,
                                 const Eigen::MatrixXd& grad_q,
                                 const TreeTopology& tree) {
  if (grad_q.rows() != rewards.q.rows() || grad_q.cols() != rewards.q.cols()) {
    throw ArgumentError("rewards.shape", "grad_q shape does not match rewards");
  }
  if (rewards.argmin_node.rows() != rewards.q.rows()) {
    throw UsageError("reward matrix is missing its argmin bookkeeping");
  }
  if (!grad_q.allFinite()) {
    throw NumericError("grad_q contains non-finite entries");
  }

  const Eigen::Index n = rewards.q.rows();
  Eigen::MatrixXd grad_splits = Eigen::MatrixXd::Zero(n, tree.num_branching());
  for (int t = 2; t <= tree.num_nodes(); ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = grad_q(i, t - 1);
      if (g == 0.0) continue;
      const int u = rewards.argmin_node(i, t - 1);
      grad_splits(i, u - 1) += rewards.argmin_sign(i, t - 1) * g;
    }
  }
  return grad_splits;
}

}  // namespace difftree
