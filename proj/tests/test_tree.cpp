#include <doctest.h>

#include <set>

#include "difftree/errors.hpp"
#include "difftree/tree.hpp"

using namespace difftree;

TEST_SUITE_BEGIN("tree");

TEST_CASE("complete tree sizes and indexing") {
  CHECK(TreeTopology::build(0).num_nodes() == 1);
  CHECK(TreeTopology::build(0).num_branching() == 0);

  const TreeTopology t2 = TreeTopology::build(2);
  CHECK(t2.num_nodes() == 7);
  CHECK(TreeTopology::parent(5) == 2);
  CHECK(TreeTopology::parent(6) == 3);

  const TreeTopology t3 = TreeTopology::build(3);
  CHECK(t3.num_nodes() == 15);
  CHECK(t3.num_branching() == 7);
  CHECK(t3.num_leaves() == 8);
  CHECK(t3.first_leaf() == 8);
  CHECK(t3.is_leaf(8));
  CHECK(!t3.is_leaf(7));
}

TEST_CASE("depth bounds") {
  CHECK_THROWS_AS(TreeTopology::build(-1), ConfigError);
  CHECK_THROWS_AS(TreeTopology::build(21), ConfigError);
  CHECK(TreeTopology::build(20).num_nodes() == (1 << 21) - 1);
}

TEST_CASE("ancestor sets on depth-2 tree") {
  const TreeTopology tree = TreeTopology::build(2);

  auto [l1, r1] = tree.ancestor_sets(1);
  CHECK(l1.empty());
  CHECK(r1.empty());

  // 5 is the right child of 2, which is the left child of the root.
  auto [l5, r5] = tree.ancestor_sets(5);
  CHECK(std::set<int>(l5.begin(), l5.end()) == std::set<int>{1});
  CHECK(std::set<int>(r5.begin(), r5.end()) == std::set<int>{2});

  auto [l7, r7] = tree.ancestor_sets(7);
  CHECK(l7.empty());
  CHECK(std::set<int>(r7.begin(), r7.end()) == std::set<int>{1, 3});

  CHECK_THROWS_AS(tree.ancestor_sets(0), ArgumentError);
  CHECK_THROWS_AS(tree.ancestor_sets(8), ArgumentError);
}

TEST_CASE("ancestor set sizes add up to node depth") {
  const TreeTopology tree = TreeTopology::build(5);
  for (int t = 1; t <= tree.num_nodes(); ++t) {
    auto [l, r] = tree.ancestor_sets(t);
    CHECK(static_cast<int>(l.size() + r.size()) == tree.node_depth(t));
  }
}

TEST_CASE("sibling recursion matches path walking up to depth 6") {
  for (int depth = 1; depth <= 6; ++depth) {
    const TreeTopology tree = TreeTopology::build(depth);
    for (int t = 1; t <= tree.num_branching(); ++t) {
      auto [lt, rt] = tree.ancestor_sets(t);
      std::set<int> L(lt.begin(), lt.end()), R(rt.begin(), rt.end());

      auto [ll, lr] = tree.ancestor_sets(TreeTopology::left_child(t));
      std::set<int> expect_l = L;
      expect_l.insert(t);
      CHECK(std::set<int>(ll.begin(), ll.end()) == expect_l);
      CHECK(std::set<int>(lr.begin(), lr.end()) == R);

      auto [rl, rr] = tree.ancestor_sets(TreeTopology::right_child(t));
      std::set<int> expect_r = R;
      expect_r.insert(t);
      CHECK(std::set<int>(rl.begin(), rl.end()) == L);
      CHECK(std::set<int>(rr.begin(), rr.end()) == expect_r);
    }
  }
}

TEST_SUITE_END();
