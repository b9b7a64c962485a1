#include "difftree/clustering.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "difftree/errors.hpp"

namespace difftree {

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> make_self_supervised(
    const Eigen::MatrixXd& X, const std::vector<int>& target_columns) {
  const int d = static_cast<int>(X.cols());
  if (target_columns.empty() ||
      static_cast<int>(target_columns.size()) >= d) {
    throw ArgumentError("cluster.targets",
                        "need 1 <= #target columns < feature count");
  }
  std::vector<char> is_target(d, 0);
  for (int c : target_columns) {
    if (c < 0 || c >= d) {
      throw ArgumentError("cluster.targets",
                          "target column " + std::to_string(c) +
                              " out of range [0, " + std::to_string(d) + ")");
    }
    if (is_target[c]) {
      throw ArgumentError("cluster.targets", "duplicate target column " +
                                                 std::to_string(c));
    }
    is_target[c] = 1;
  }

  Eigen::MatrixXd features(X.rows(), d - target_columns.size());
  Eigen::MatrixXd targets(X.rows(), target_columns.size());
  Eigen::Index fc = 0, tc = 0;
  for (int c = 0; c < d; ++c) {
    if (is_target[c]) {
      targets.col(tc++) = X.col(c);
    } else {
      features.col(fc++) = X.col(c);
    }
  }
  return {std::move(features), std::move(targets)};
}

double dendrogram_purity(const std::vector<int>& assigned_node,
                         const std::vector<int>& labels,
                         const TreeTopology& tree) {
  const size_t n = assigned_node.size();
  if (labels.size() != n) {
    throw ArgumentError("purity.shape", "assignments and labels differ in size");
  }

  // Compact the label alphabet.
  std::map<int, int> label_ids;
  for (int l : labels) label_ids.emplace(l, 0);
  int next = 0;
  for (auto& [label, id] : label_ids) id = next++;
  const int num_classes = next;

  const int num_nodes = tree.num_nodes();
  // counts[t][c]: points of class c assigned inside the subtree rooted at t.
  std::vector<std::vector<long>> counts(
      num_nodes + 1, std::vector<long>(num_classes, 0));
  for (size_t i = 0; i < n; ++i) {
    tree.check_node(assigned_node[i]);
    ++counts[assigned_node[i]][label_ids[labels[i]]];
  }
  for (int t = num_nodes; t >= 2; --t) {
    const int p = TreeTopology::parent(t);
    for (int c = 0; c < num_classes; ++c) counts[p][c] += counts[t][c];
  }

  auto choose2 = [](long k) { return 0.5 * static_cast<double>(k) *
                                     static_cast<double>(k - 1); };

  double total_pairs = 0.0;
  for (int c = 0; c < num_classes; ++c) total_pairs += choose2(counts[1][c]);
  if (total_pairs == 0.0) {
    throw ArgumentError("purity.no_pairs",
                        "dendrogram purity undefined: every class is a singleton");
  }

  // Pairs whose LCA is exactly t: both in the subtree of t, not both inside
  // the same child subtree.
  double score = 0.0;
  for (int t = 1; t <= num_nodes; ++t) {
    long subtree_total = 0;
    for (int c = 0; c < num_classes; ++c) subtree_total += counts[t][c];
    if (subtree_total < 2) continue;
    for (int c = 0; c < num_classes; ++c) {
      double pairs_here = choose2(counts[t][c]);
      if (!tree.is_leaf(t)) {
        pairs_here -= choose2(counts[TreeTopology::left_child(t)][c]);
        pairs_here -= choose2(counts[TreeTopology::right_child(t)][c]);
      }
      if (pairs_here <= 0.0) continue;
      score += pairs_here * static_cast<double>(counts[t][c]) /
               static_cast<double>(subtree_total);
    }
  }
  return score / total_pairs;
}

std::vector<int> assign_to_active_node(const Eigen::MatrixXd& splits,
                                       const Eigen::VectorXd& a,
                                       const TreeTopology& tree) {
  if (splits.cols() != tree.num_branching() ||
      a.size() != tree.num_nodes()) {
    throw ArgumentError("cluster.shape", "splits or a do not match the tree");
  }
  std::vector<int> out(splits.rows());
  for (Eigen::Index i = 0; i < splits.rows(); ++i) {
    int t = 1;
    while (!tree.is_leaf(t)) {
      const int next = splits(i, t - 1) < 0.0 ? TreeTopology::left_child(t)
                                              : TreeTopology::right_child(t);
      if (a(next - 1) <= 0.0) break;
      t = next;
    }
    out[static_cast<size_t>(i)] = t;
  }
  return out;
}

std::vector<int> hard_leaf_assignment(const Eigen::MatrixXd& splits,
                                      const TreeTopology& tree) {
  if (splits.cols() != tree.num_branching()) {
    throw ArgumentError("cluster.shape", "splits do not match the tree");
  }
  std::vector<int> out(splits.rows());
  for (Eigen::Index i = 0; i < splits.rows(); ++i) {
    int t = 1;
    while (!tree.is_leaf(t)) {
      t = splits(i, t - 1) < 0.0 ? TreeTopology::left_child(t)
                                 : TreeTopology::right_child(t);
    }
    out[static_cast<size_t>(i)] = t;
  }
  return out;
}

}  // namespace difftree
