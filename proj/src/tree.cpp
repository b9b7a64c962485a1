#include "difftree/tree.hpp"

#include <string>

#include "difftree/errors.hpp"

namespace difftree {

namespace {
constexpr int kMaxDepth = 20;  // guards memory: 2^21 - 1 nodes at most
}

TreeTopology::TreeTopology(int depth)
    : depth_(depth), num_nodes_((1 << (depth + 1)) - 1) {}

TreeTopology TreeTopology::build(int depth) {
  if (depth < 0 || depth > kMaxDepth) {
    throw ConfigError("config.depth", "tree depth must be in [0, " +
                                          std::to_string(kMaxDepth) +
                                          "], got " + std::to_string(depth));
  }
  return TreeTopology(depth);
}

void TreeTopology::check_node(int t) const {
  if (t < 1 || t > num_nodes_) {
    throw ArgumentError("tree.node_id", "node id " + std::to_string(t) +
                                            " outside [1, " +
                                            std::to_string(num_nodes_) + "]");
  }
}

int TreeTopology::node_depth(int t) const {
  check_node(t);
  int d = 0;
  while (t > 1) {
    t = parent(t);
    ++d;
  }
  return d;
}

std::pair<std::vector<int>, std::vector<int>> TreeTopology::ancestor_sets(
    int t) const {
  check_node(t);
  std::vector<int> left, right;
  // Walk up to the root; u's parent is in A_L(t) when u is a left child.
  while (t > 1) {
    int p = parent(t);
    if (t == left_child(p)) {
      left.push_back(p);
    } else {
      right.push_back(p);
    }
    t = p;
  }
  return {std::move(left), std::move(right)};
}

}  // namespace difftree
