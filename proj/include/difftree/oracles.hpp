#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "difftree/tree.hpp"

namespace difftree {

// Deliberately slow, independent ground-truth solvers. Used by tests, the
// relaxation-gap study and the bench CLI; never by the training path.
struct OracleConfig {
  // Projected-gradient step. The effective step is additionally capped at
  // 1/L with L = max(1, lambda), the objective's gradient Lipschitz constant.
  double pg_step = 0.25;
  int pg_iters = 200000;
  int dykstra_iters = 500;  // alternating-projection sweeps per projection
  double grid_step = 1e-6;  // 1-D grid oracle resolution
};

// Solves the relaxed tree program by projected gradient descent, with the
// projection onto {0 <= z <= a <= 1, a_t <= a_p(t)} computed by Dykstra's
// alternating projections over the individual boxes and halfspaces. Stops
// once the objective decrease over 100 iterations falls below 1e-12; throws
// OracleFailure if the iteration budget runs out first.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> qp_oracle(
    const Eigen::MatrixXd& q, double lambda, const TreeTopology& tree,
    const OracleConfig& config = {});

// Brute-force optimum of the integer pruning program: enumerates every binary
// a respecting a_t <= a_p(t) (|T| <= 15), takes z_it = a_t * 1[q_it > 0], and
// maximizes sum z.q - lambda/2 ||a||^2. Ties prefer fewer active nodes, then
// the lexicographically smallest a.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> mip_oracle(const Eigen::MatrixXd& q,
                                                       double lambda,
                                                       const TreeTopology& tree);

// Grid scan of the scalar group objective over [0, 1] followed by one
// ternary-search refinement inside the winning cell.
double scalar_grid_oracle(double lambda, int group_size,
                          std::span<const double> values,
                          double grid_step = 1e-6);

// Central finite differences of fn at the given point, elementwise.
Eigen::MatrixXd finite_diff(
    const std::function<double(const Eigen::MatrixXd&)>& fn,
    const Eigen::MatrixXd& at, double h);

// Exact pairwise-enumeration dendrogram purity: over all unordered same-class
// pairs, the purity of the subtree rooted at the pair's least common ancestor.
// Assignments may point at any node (pruning may collapse points onto internal
// nodes). Throws if every class is a singleton.
double dendrogram_purity_oracle(const std::vector<int>& assigned_node,
                                const std::vector<int>& labels,
                                const TreeTopology& tree);

int lca(int u, int v);

}  // namespace difftree
