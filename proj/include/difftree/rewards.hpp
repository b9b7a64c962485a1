#pragma once

#include <Eigen/Dense>

#include "difftree/tree.hpp"

namespace difftree {

// Per-node reward matrix. Row i, column t-1 holds q_it, the margin-style score
// of sending point i to node t: the minimum over ancestor split values, signed
// by which child the path to t follows. The root column is fixed at 1.
//
// argmin_node / argmin_sign record, for every non-root (i, t), the ancestor
// attaining that minimum and the sign its split value enters with (+1 for a
// right-branch ancestor, -1 for a left-branch one). Ties go to the smallest
// ancestor id. The backward pass routes gradients through exactly that entry.
struct RewardMatrix {
  Eigen::MatrixXd q;                              // n x |T|
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> argmin_node;  // 0 at root column
  Eigen::Matrix<signed char, Eigen::Dynamic, Eigen::Dynamic> argmin_sign;
};

// splits: n x |T_B| matrix of raw split values s_t(x_i). Requires finite
// entries and depth >= 1.
RewardMatrix compute_rewards(const Eigen::MatrixXd& splits,
                             const TreeTopology& tree);

// Accumulates grad_q (n x |T|) back onto split values (n x |T_B|) through the
// recorded minimizing ancestors. The root column of grad_q is ignored.
Eigen::MatrixXd rewards_backward(const RewardMatrix& rewards,
                                 const Eigen::MatrixXd& grad_q,
                                 const TreeTopology& tree);

}  // namespace difftree
