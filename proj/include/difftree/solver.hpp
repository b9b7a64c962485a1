#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "difftree/tree.hpp"

namespace difftree {

struct SolverConfig {
  double lambda = 1.0;
  // An edge (t, p(t)) counts as violated when a_t > a_p(t) + this slack.
  double violation_tolerance = 1e-12;
  // Margin for the strict 0 < a < 1 and 0 < q+1/2 < a tests in the backward.
  double interior_tolerance = 1e-12;
};

struct SupportPair {
  int point;  // 0-based row
  int node;   // 1-based node id
};

// One pooled group at the optimum: the member nodes share the value a_G,
// computed from the k_star largest shifted rewards over the group (the
// support). clipped marks a_G produced by clipping the unconstrained
// stationary point into [0, 1]; gradients are zero there.
struct PooledGroup {
  std::vector<int> nodes;
  double value = 0.0;
  int k_star = 0;
  bool clipped = false;
  std::vector<SupportPair> support;
};

struct TreeSolution {
  Eigen::MatrixXd z;  // n x |T|, z_it = clip(q_it + 1/2, [0, a_t])
  Eigen::VectorXd a;  // |T|
  std::vector<PooledGroup> groups;
  std::vector<int> group_of;  // node id -> index into groups; slot 0 unused
  int merges = 0;
};

struct ScalarSolution {
  double value = 0.0;  // clipped into [0, 1]
  int k_star = 0;
  bool clipped = false;
};

// Exact minimizer of the relaxed traversal-and-pruning program
//
//   min  lambda/2 ||a||^2 + 1/2 sum_i ||z_i - q_i - 1/2||^2
//   s.t. 0 <= z_it <= a_t <= 1,  a_t <= a_p(t) for non-root t
//
// via its isotonic reformulation in a: shifted rewards are sorted once per
// node, every node starts as its own group with the closed-form scalar
// solution, and the maximum violator of a_t <= a_p(t) is pooled with its
// parent's group until no violations remain (at most |T|-1 merges).
TreeSolution solve_tree_program(const Eigen::MatrixXd& q,
                                const SolverConfig& config,
                                const TreeTopology& tree);

// Closed form for argmin_a  lambda*|G|/2 a^2 + sum_{v in values, a <= v}
// 1/2 (a - v)^2  over [0, 1], where values are the group's shifted rewards
// sorted descending. Scans k = 0, 1, ... and returns at the smallest k with
// a(k) = (sum of top k) / (lambda*|G| + k) strictly above the next value.
ScalarSolution solve_scalar_subproblem(std::span<const double> sorted_desc,
                                       int group_size, double lambda);

// Elementwise clip of q + 1/2 into [0, a_t].
Eigen::MatrixXd project_traversals(const Eigen::MatrixXd& q,
                                   const Eigen::VectorXd& a);

// Closed-form VJP of solve_tree_program w.r.t. q. Routes grad_z through the
// clip (identity on the interior, onto a at the upper boundary) and grad_a
// plus pinned grad_z mass through 1/(lambda*|G| + k_star) onto the support of
// each interior, unclipped group. Boundary coordinates get a zero gradient,
// one valid choice of generalized Jacobian.
Eigen::MatrixXd solve_backward(const TreeSolution& solution,
                               const Eigen::MatrixXd& grad_z,
                               const Eigen::VectorXd& grad_a,
                               const SolverConfig& config,
                               const TreeTopology& tree);

// Value of the relaxed objective above at a feasible (z, a).
double tree_program_objective(const Eigen::MatrixXd& q,
                              const Eigen::MatrixXd& z,
                              const Eigen::VectorXd& a, double lambda);

}  // namespace difftree
