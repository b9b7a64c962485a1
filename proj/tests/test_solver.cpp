#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "difftree/errors.hpp"
#include "difftree/oracles.hpp"
#include "difftree/solver.hpp"
#include "difftree/tree.hpp"
#include "support/checks.hpp"

using namespace difftree;
using difftree::testing::parent_upper_bound;
using difftree::testing::random_q;
using difftree::testing::verify_solution;

TEST_SUITE_BEGIN("solver");

TEST_CASE("scalar subproblem closed form") {
  SUBCASE("single value above zero") {
    const double vals[] = {1.0};  // q = 0.5 shifted
    const ScalarSolution s = solve_scalar_subproblem(vals, 1, 1.0);
    CHECK(s.value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.k_star == 1);
    CHECK(!s.clipped);
  }
  SUBCASE("two values, only the top one active") {
    const double vals[] = {1.1, 0.3};
    const ScalarSolution s = solve_scalar_subproblem(vals, 1, 2.0);
    CHECK(s.value == doctest::Approx(1.1 / 3.0).epsilon(1e-12));
    CHECK(s.k_star == 1);
  }
  SUBCASE("all-negative values pin a at zero") {
    const double vals[] = {-9.5};
    const ScalarSolution s = solve_scalar_subproblem(vals, 1, 1.0);
    CHECK(s.value == 0.0);
    CHECK(s.k_star == 0);
    CHECK(!s.clipped);
  }
  SUBCASE("empty list") {
    const ScalarSolution s = solve_scalar_subproblem({}, 1, 1.0);
    CHECK(s.value == 0.0);
    CHECK(s.k_star == 0);
  }
  SUBCASE("clipping at one") {
    const double vals[] = {10.0};
    const ScalarSolution s = solve_scalar_subproblem(vals, 1, 0.1);
    CHECK(s.value == 1.0);
    CHECK(s.clipped);
  }
  SUBCASE("unsorted input is an internal error") {
    const double vals[] = {0.1, 0.5};
    CHECK_THROWS_AS(solve_scalar_subproblem(vals, 1, 1.0), InternalError);
  }
  SUBCASE("bad arguments") {
    const double vals[] = {0.5};
    CHECK_THROWS_AS(solve_scalar_subproblem(vals, 0, 1.0), ArgumentError);
    CHECK_THROWS_AS(solve_scalar_subproblem(vals, 1, 0.0), ConfigError);
  }
}

TEST_CASE("scalar closed form agrees with the grid oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> vdist(-2.0, 2.5);
  std::uniform_real_distribution<double> ldist(0.1, 100.0);
  std::uniform_int_distribution<int> mdist(0, 12);
  std::uniform_int_distribution<int> gdist(1, 4);
  for (int trial = 0; trial < 300; ++trial) {
    const int m = mdist(rng);
    std::vector<double> vals(m);
    for (double& v : vals) v = vdist(rng);
    std::sort(vals.begin(), vals.end(), std::greater<>());
    const double lambda = ldist(rng);
    const int gsize = gdist(rng);
    const ScalarSolution s = solve_scalar_subproblem(vals, gsize, lambda);
    const double grid = scalar_grid_oracle(lambda, gsize, vals, 1e-6);
    CHECK(std::abs(s.value - grid) < 2e-6);
  }
}

TEST_CASE("worked depth-1 instance: pooling and projection") {
  const TreeTopology tree = TreeTopology::build(1);
  Eigen::MatrixXd q(1, 3);
  q << -0.5, 0.5, -10.0;
  const SolverConfig cfg{1.0};
  const TreeSolution sol = solve_tree_program(q, cfg, tree);

  CHECK(sol.a(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(sol.a(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(sol.a(2) == 0.0);
  CHECK(sol.z(0, 0) == 0.0);
  CHECK(sol.z(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(sol.z(0, 2) == 0.0);
  CHECK(sol.merges == 1);

  // Root and left child pooled, with support {(0, node 2)} and k* = 1.
  CHECK(sol.group_of[1] == sol.group_of[2]);
  CHECK(sol.group_of[1] != sol.group_of[3]);
  const PooledGroup& g = sol.groups[sol.group_of[1]];
  CHECK(g.k_star == 1);
  REQUIRE(g.support.size() == 1);
  CHECK(g.support[0].point == 0);
  CHECK(g.support[0].node == 2);

  CHECK(verify_solution(q, sol, cfg, tree) == "");

  // Against the projected-gradient oracle.
  auto [oz, oa] = qp_oracle(q, 1.0, tree);
  CHECK((sol.a - oa).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((sol.z - oz).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("worked depth-1 instance: strong root reward, pruned children") {
  const TreeTopology tree = TreeTopology::build(1);
  Eigen::MatrixXd q(1, 3);
  q << 1.0, -10.0, -10.0;
  const SolverConfig cfg{1.0};
  const TreeSolution sol = solve_tree_program(q, cfg, tree);
  CHECK(sol.a(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(sol.a(1) == 0.0);
  CHECK(sol.a(2) == 0.0);
  CHECK(sol.z(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(sol.z(0, 1) == 0.0);
  CHECK(sol.z(0, 2) == 0.0);
  CHECK(sol.merges == 0);

  const std::vector<double> shifted = {1.5};
  const double grid = scalar_grid_oracle(1.0, 1, shifted);
  CHECK(std::abs(sol.a(0) - grid) < 2e-6);
}

TEST_CASE("validation") {
  const TreeTopology tree = TreeTopology::build(1);
  Eigen::MatrixXd q(1, 3);
  q.setZero();
  CHECK_THROWS_AS(solve_tree_program(q, SolverConfig{0.0}, tree), ConfigError);
  CHECK_THROWS_AS(solve_tree_program(q, SolverConfig{-1.0}, tree), ConfigError);
  q(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_tree_program(q, SolverConfig{1.0}, tree), NumericError);
  Eigen::MatrixXd wrong(1, 4);
  wrong.setZero();
  CHECK_THROWS_AS(solve_tree_program(wrong, SolverConfig{1.0}, tree),
                  ArgumentError);
}

TEST_CASE("project_traversals clips against a") {
  Eigen::MatrixXd q(1, 3);
  q << 0.5, -0.7, 0.5;
  Eigen::VectorXd a(3);
  a << 1.0, 1.0, 1.0 / 3.0;
  const Eigen::MatrixXd z = project_traversals(q, a);
  CHECK(z(0, 0) == 1.0);
  CHECK(z(0, 1) == 0.0);
  CHECK(z(0, 2) == doctest::Approx(1.0 / 3.0));
  Eigen::VectorXd bad(2);
  CHECK_THROWS_AS(project_traversals(q, bad), ArgumentError);
}

TEST_CASE("structural invariants on random instances") {
  std::mt19937_64 rng(5);
  const double lambdas[] = {0.1, 1.0, 10.0};
  for (int depth = 1; depth <= 3; ++depth) {
    const TreeTopology tree = TreeTopology::build(depth);
    for (int trial = 0; trial < 60; ++trial) {
      const Eigen::MatrixXd q = random_q(9, tree.num_nodes(), rng);
      const SolverConfig cfg{lambdas[trial % 3]};
      const TreeSolution sol = solve_tree_program(q, cfg, tree);
      INFO("depth ", depth, " trial ", trial);
      CHECK(verify_solution(q, sol, cfg, tree) == "");
    }
  }
}

TEST_CASE("matches the projected-gradient oracle on random instances") {
  std::mt19937_64 rng(9);
  const TreeTopology tree = TreeTopology::build(2);
  const double lambdas[] = {0.1, 1.0, 10.0};
  for (int trial = 0; trial < 60; ++trial) {
    const Eigen::MatrixXd q = random_q(10, tree.num_nodes(), rng);
    const double lambda = lambdas[trial % 3];
    const TreeSolution sol = solve_tree_program(q, SolverConfig{lambda}, tree);
    auto [oz, oa] = qp_oracle(q, lambda, tree);
    INFO("trial ", trial, " lambda ", lambda);
    CHECK((sol.a - oa).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((sol.z - oz).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("feasible perturbations never improve the objective") {
  std::mt19937_64 rng(21);
  const TreeTopology tree = TreeTopology::build(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd q = random_q(6, tree.num_nodes(), rng);
    const SolverConfig cfg{1.0};
    const TreeSolution sol = solve_tree_program(q, cfg, tree);
    const double base = tree_program_objective(q, sol.z, sol.a, cfg.lambda);

    const double eps = 1e-4;
    for (Eigen::Index t = 0; t < tree.num_nodes(); ++t) {
      for (Eigen::Index i = 0; i < q.rows(); ++i) {
        for (double delta : {eps, -eps}) {
          Eigen::MatrixXd z = sol.z;
          const double cand = z(i, t) + delta;
          if (cand < 0.0 || cand > sol.a(t)) continue;
          z(i, t) = cand;
          CHECK(tree_program_objective(q, z, sol.a, cfg.lambda) >=
                base - 1e-10);
        }
      }
      for (double delta : {eps, -eps}) {
        Eigen::VectorXd a = sol.a;
        const double cand = a(t) + delta;
        if (cand < 0.0 || cand > 1.0) continue;
        const int node = static_cast<int>(t) + 1;
        if (node > 1 && cand > a(TreeTopology::parent(node) - 1)) continue;
        bool child_ok = true;
        if (!tree.is_leaf(node)) {
          child_ok = a(TreeTopology::left_child(node) - 1) <= cand &&
                     a(TreeTopology::right_child(node) - 1) <= cand;
        }
        if (!child_ok) continue;
        a(t) = cand;
        // z must stay feasible: clip it against the perturbed a.
        const Eigen::MatrixXd z = sol.z.cwiseMin(a.transpose().replicate(q.rows(), 1));
        CHECK(tree_program_objective(q, z, a, cfg.lambda) >= base - 1e-10);
      }
    }
  }
}

TEST_CASE("permutation equivariance is bit-exact") {
  std::mt19937_64 rng(33);
  const TreeTopology tree = TreeTopology::build(2);
  const Eigen::MatrixXd q = random_q(12, tree.num_nodes(), rng);
  const SolverConfig cfg{0.7};
  const TreeSolution sol = solve_tree_program(q, cfg, tree);

  std::vector<int> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd qp(q.rows(), q.cols());
  for (int i = 0; i < 12; ++i) qp.row(i) = q.row(perm[i]);
  const TreeSolution sol_p = solve_tree_program(qp, cfg, tree);

  CHECK((sol.a - sol_p.a).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 12; ++i) {
    CHECK((sol_p.z.row(i) - sol.z.row(perm[i])).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("backward: worked example and finite differences") {
  const TreeTopology tree = TreeTopology::build(1);
  Eigen::MatrixXd q(1, 3);
  q << -0.5, 0.5, -10.0;
  const SolverConfig cfg{1.0};
  const TreeSolution sol = solve_tree_program(q, cfg, tree);

  SUBCASE("grad_a on the root flows to the pooled support") {
    Eigen::VectorXd grad_a = Eigen::VectorXd::Zero(3);
    grad_a(0) = 1.0;
    const Eigen::MatrixXd g = solve_backward(
        sol, Eigen::MatrixXd::Zero(1, 3), grad_a, cfg, tree);
    CHECK(g(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(std::abs(g(0, 0)) == 0.0);
    CHECK(std::abs(g(0, 2)) == 0.0);
  }
  SUBCASE("grad_z at a pinned coordinate flows through a") {
    Eigen::MatrixXd grad_z = Eigen::MatrixXd::Zero(1, 3);
    grad_z(0, 1) = 1.0;  // z_2 = a_2
    const Eigen::MatrixXd g =
        solve_backward(sol, grad_z, Eigen::VectorXd::Zero(3), cfg, tree);
    CHECK(g(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("zero cotangents give a zero gradient") {
    const Eigen::MatrixXd g = solve_backward(
        sol, Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Zero(3), cfg, tree);
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("sum of a as scalar function matches finite differences") {
    const Eigen::MatrixXd fd = finite_diff(
        [&](const Eigen::MatrixXd& qx) {
          return solve_tree_program(qx, cfg, tree).a.sum();
        },
        q, 1e-5);
    // Both pooled nodes move with q_2: analytic 1/3 + 1/3.
    CHECK(fd(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-4));
    const Eigen::MatrixXd g = solve_backward(
        sol, Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Ones(3), cfg, tree);
    CHECK((g - fd).cwiseAbs().maxCoeff() < 1e-4);
  }
  SUBCASE("stale solution is a usage error") {
    TreeSolution bare;
    bare.z = sol.z;
    bare.a = sol.a;
    CHECK_THROWS_AS(solve_backward(bare, Eigen::MatrixXd::Zero(1, 3),
                                   Eigen::VectorXd::Zero(3), cfg, tree),
                    UsageError);
  }
}

TEST_CASE("backward matches finite differences on random interior points") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const TreeTopology tree = TreeTopology::build(2);
  const SolverConfig cfg{1.3};
  int done = 0;
  while (done < 25) {
    const Eigen::MatrixXd q = random_q(6, tree.num_nodes(), rng);
    const TreeSolution sol = solve_tree_program(q, cfg, tree);

    // Skip degenerate points: clipped or boundary groups, kinks of the clip.
    bool degenerate = false;
    for (const PooledGroup& g : sol.groups) {
      if (g.clipped || g.value < 1e-3 || g.value > 1.0 - 1e-3) degenerate = true;
    }
    for (Eigen::Index t = 0; t < tree.num_nodes() && !degenerate; ++t) {
      for (Eigen::Index i = 0; i < q.rows(); ++i) {
        const double shifted = q(i, t) + 0.5;
        if (std::abs(shifted) < 1e-3 ||
            std::abs(shifted - sol.a(t)) < 1e-3) {
          degenerate = true;
          break;
        }
      }
    }
    if (degenerate) continue;
    ++done;

    Eigen::MatrixXd grad_z(q.rows(), q.cols());
    Eigen::VectorXd grad_a(tree.num_nodes());
    for (Eigen::Index i = 0; i < grad_z.rows(); ++i) {
      for (Eigen::Index t = 0; t < grad_z.cols(); ++t) grad_z(i, t) = unit(rng);
    }
    for (Eigen::Index t = 0; t < grad_a.size(); ++t) grad_a(t) = unit(rng);

    const Eigen::MatrixXd analytic =
        solve_backward(sol, grad_z, grad_a, cfg, tree);
    const Eigen::MatrixXd fd = finite_diff(
        [&](const Eigen::MatrixXd& qx) {
          const TreeSolution s = solve_tree_program(qx, cfg, tree);
          return (s.z.array() * grad_z.array()).sum() +
                 (s.a.array() * grad_a.array()).sum();
        },
        q, 1e-5);
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    CHECK((analytic - fd).cwiseAbs().maxCoeff() / scale < 1e-4);
  }
}

TEST_CASE("relaxation gap against the integer optimum shrinks with lambda") {
  std::mt19937_64 rng(55);
  const TreeTopology tree = TreeTopology::build(2);
  const std::vector<double> grid = {0.1, 1.0, 10.0, 100.0};
  const int instances = 120;  // acceptance runs the full 1000-instance study

  std::vector<Eigen::MatrixXd> qs;
  for (int k = 0; k < instances; ++k) {
    Eigen::MatrixXd q = random_q(10, tree.num_nodes(), rng);
    parent_upper_bound(q, tree);
    qs.push_back(std::move(q));
  }
  std::vector<double> mean_gap;
  for (double lambda : grid) {
    double sum = 0.0;
    for (const Eigen::MatrixXd& q : qs) {
      const TreeSolution sol = solve_tree_program(q, SolverConfig{lambda}, tree);
      auto [mz, ma] = mip_oracle(q, lambda, tree);
      sum += (sol.a - ma).cwiseAbs().maxCoeff();
    }
    mean_gap.push_back(sum / instances);
  }
  // Each mean carries +-0.05 noise, so a consecutive comparison may slip by
  // at most 0.1. The gap curve has a small hump near lambda = 1 before the
  // sharp drop toward the integer optimum.
  for (size_t j = 0; j + 1 < mean_gap.size(); ++j) {
    CHECK(mean_gap[j + 1] <= mean_gap[j] + 0.1);
  }
  CHECK(mean_gap.back() <= mean_gap.front());
}

TEST_SUITE_END();
