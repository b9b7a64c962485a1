#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "difftree/tree.hpp"

namespace difftree {

// Splits the columns of X into regression targets (the listed indices) and
// input features (the rest, original order preserved). Indices must be
// distinct, in range, and leave at least one feature column.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> make_self_supervised(
    const Eigen::MatrixXd& X, const std::vector<int>& target_columns);

// Dendrogram purity in O(n D + |T| C): class counts are aggregated bottom-up
// and every node contributes the same-class pairs whose least common ancestor
// it is, weighted by its subtree purity. Matches the pairwise oracle.
// Assignments may reference internal nodes (pruning collapse).
double dendrogram_purity(const std::vector<int>& assigned_node,
                         const std::vector<int>& labels,
                         const TreeTopology& tree);

// Hard routing through the pruned tree: follow s < 0 left / otherwise right,
// stopping at the deepest node on the path whose activity stays positive.
std::vector<int> assign_to_active_node(const Eigen::MatrixXd& splits,
                                       const Eigen::VectorXd& a,
                                       const TreeTopology& tree);

// Hard routing all the way to a leaf (ties s = 0 go right).
std::vector<int> hard_leaf_assignment(const Eigen::MatrixXd& splits,
                                      const TreeTopology& tree);

}  // namespace difftree
