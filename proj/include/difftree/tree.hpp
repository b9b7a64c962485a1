#pragma once

#include <utility>
#include <vector>

namespace difftree {

// Complete binary tree of depth D with 1-based heap indexing: root is node 1,
// the children of node t are 2t and 2t+1. Branching nodes are 1..2^D-1, leaves
// 2^D..2^(D+1)-1. Immutable after construction; safe to share across threads.
class TreeTopology {
 public:
  static TreeTopology build(int depth);

  int depth() const noexcept { return depth_; }
  int num_nodes() const noexcept { return num_nodes_; }
  int num_branching() const noexcept { return (num_nodes_ + 1) / 2 - 1; }
  int num_leaves() const noexcept { return (num_nodes_ + 1) / 2; }
  int first_leaf() const noexcept { return num_branching() + 1; }

  bool is_leaf(int t) const noexcept { return t >= first_leaf(); }
  static int parent(int t) noexcept { return t / 2; }
  static int left_child(int t) noexcept { return 2 * t; }
  static int right_child(int t) noexcept { return 2 * t + 1; }

  // Distance from the root: node_depth(1) == 0.
  int node_depth(int t) const;

  // Strict ancestors of t split by which child the path to t follows:
  // A_L holds ancestors left-branched through, A_R those right-branched
  // through. The root yields two empty sets.
  std::pair<std::vector<int>, std::vector<int>> ancestor_sets(int t) const;

  void check_node(int t) const;

 private:
  explicit TreeTopology(int depth);

  int depth_ = 0;
  int num_nodes_ = 1;
};

}  // namespace difftree
