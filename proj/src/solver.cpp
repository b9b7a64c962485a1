#include "difftree/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "difftree/errors.hpp"

namespace difftree {

namespace {

struct Entry {
  double value;  // q_it + 1/2
  int point;
  int node;
};

// Canonical descending order; ties resolved by (point, node) so that support
// sets and merge results do not depend on input row permutation artifacts.
inline bool entry_before(const Entry& a, const Entry& b) {
  if (a.value != b.value) return a.value > b.value;
  if (a.point != b.point) return a.point < b.point;
  return a.node < b.node;
}

struct WorkGroup {
  std::vector<int> nodes;
  std::vector<Entry> entries;  // sorted by entry_before
  double value = 0.0;
  int k_star = 0;
  bool clipped = false;
  bool alive = true;
};

// Prop-2 scan over a sorted entry list. Returns (raw stationary value, k*).
std::pair<double, int> scan_subproblem(const std::vector<Entry>& entries,
                                       double lambda, int group_size) {
  const double denom_base = lambda * group_size;
  const int m = static_cast<int>(entries.size());
  double prefix = 0.0;
  double a_k = 0.0;
  int k = 0;
  while (k < m) {
    // a(k) beats the (k+1)-th value: stop. Ties extend the active set.
    if (a_k > entries[k].value) break;
    prefix += entries[k].value;
    ++k;
    a_k = prefix / (denom_base + k);
  }
  return {a_k, k};
}

void resolve_group(WorkGroup& g, double lambda) {
  auto [raw, k] = scan_subproblem(g.entries, lambda,
                                  static_cast<int>(g.nodes.size()));
  g.k_star = k;
  g.clipped = raw < 0.0 || raw > 1.0;
  g.value = std::clamp(raw, 0.0, 1.0);
}

}  // namespace

ScalarSolution solve_scalar_subproblem(std::span<const double> sorted_desc,
                                       int group_size, double lambda) {
  if (group_size < 1) {
    throw ArgumentError("solver.group_size", "group size must be >= 1");
  }
  if (!(lambda > 0.0)) {
    throw ConfigError("config.lambda", "lambda must be > 0");
  }
  for (size_t j = 0; j + 1 < sorted_desc.size(); ++j) {
    if (sorted_desc[j] < sorted_desc[j + 1] - 1e-12) {
      throw InternalError("scalar subproblem input is not sorted descending");
    }
  }

  const double denom_base = lambda * group_size;
  const int m = static_cast<int>(sorted_desc.size());
  double prefix = 0.0;
  double a_k = 0.0;
  int k = 0;
  while (k < m) {
    if (a_k > sorted_desc[k]) break;
    prefix += sorted_desc[k];
    ++k;
    a_k = prefix / (denom_base + k);
  }
  ScalarSolution out;
  out.k_star = k;
  out.clipped = a_k < 0.0 || a_k > 1.0;
  out.value = std::clamp(a_k, 0.0, 1.0);
  return out;
}

Eigen::MatrixXd project_traversals(const Eigen::MatrixXd& q,
                                   const Eigen::VectorXd& a) {
  if (q.cols() != a.size()) {
    throw ArgumentError("solver.shape", "q has " + std::to_string(q.cols()) +
                                            " columns but a has " +
                                            std::to_string(a.size()));
  }
  Eigen::MatrixXd z(q.rows(), q.cols());
  for (Eigen::Index t = 0; t < q.cols(); ++t) {
    const double cap = a(t);
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      z(i, t) = std::clamp(q(i, t) + 0.5, 0.0, cap);
    }
  }
  return z;
}

TreeSolution solve_tree_program(const Eigen::MatrixXd& q,
                                const SolverConfig& config,
                                const TreeTopology& tree) {
  if (!(config.lambda > 0.0)) {
    throw ConfigError("config.lambda", "lambda must be > 0");
  }
  const int num_nodes = tree.num_nodes();
  if (q.cols() != num_nodes) {
    throw ArgumentError("solver.shape",
                        "q must have " + std::to_string(num_nodes) +
                            " columns, got " + std::to_string(q.cols()));
  }
  if (!q.allFinite()) {
    throw NumericError("reward matrix contains non-finite entries");
  }

  const int n = static_cast<int>(q.rows());

  // One-time sort of the shifted rewards, per node.
  std::vector<WorkGroup> groups(num_nodes);
  std::vector<int> group_of(num_nodes + 1, 0);
  for (int t = 1; t <= num_nodes; ++t) {
    WorkGroup& g = groups[t - 1];
    g.nodes = {t};
    g.entries.resize(n);
    for (int i = 0; i < n; ++i) {
      g.entries[i] = {q(i, t - 1) + 0.5, i, t};
    }
    std::sort(g.entries.begin(), g.entries.end(), entry_before);
    resolve_group(g, config.lambda);
    group_of[t] = t - 1;
  }

  // Pool the maximum violator with its parent's group until the tree order
  // holds. Ties on the violating value go to the smallest node id.
  int merges = 0;
  for (;;) {
    int best_node = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int t = 2; t <= num_nodes; ++t) {
      const int g = group_of[t];
      const int gp = group_of[TreeTopology::parent(t)];
      if (g == gp) continue;
      const double at = groups[g].value;
      if (at > groups[gp].value + config.violation_tolerance &&
          at > best_value) {
        best_value = at;
        best_node = t;
      }
    }
    if (best_node == 0) break;

    const int child_idx = group_of[best_node];
    const int parent_idx = group_of[TreeTopology::parent(best_node)];
    WorkGroup& child = groups[child_idx];
    WorkGroup& parent = groups[parent_idx];

    std::vector<Entry> merged(child.entries.size() + parent.entries.size());
    std::merge(parent.entries.begin(), parent.entries.end(),
               child.entries.begin(), child.entries.end(), merged.begin(),
               entry_before);
    parent.entries = std::move(merged);
    for (int t : child.nodes) {
      parent.nodes.push_back(t);
      group_of[t] = parent_idx;
    }
    child.alive = false;
    child.entries.clear();
    child.nodes.clear();
    resolve_group(parent, config.lambda);
    ++merges;
  }

  TreeSolution sol;
  sol.merges = merges;
  sol.a.resize(num_nodes);
  sol.group_of.assign(num_nodes + 1, -1);
  for (WorkGroup& g : groups) {
    if (!g.alive) continue;
    PooledGroup out;
    out.nodes = std::move(g.nodes);
    out.value = g.value;
    out.k_star = g.k_star;
    out.clipped = g.clipped;
    out.support.reserve(g.k_star);
    for (int j = 0; j < g.k_star; ++j) {
      out.support.push_back({g.entries[j].point, g.entries[j].node});
    }
    const int idx = static_cast<int>(sol.groups.size());
    for (int t : out.nodes) {
      sol.group_of[t] = idx;
      sol.a(t - 1) = out.value;
    }
    sol.groups.push_back(std::move(out));
  }
  sol.z = project_traversals(q, sol.a);
  return sol;
}

Eigen::MatrixXd solve_backward(const TreeSolution& solution,
                               const Eigen::MatrixXd& grad_z,
                               const Eigen::VectorXd& grad_a,
                               const SolverConfig& config,
                               const TreeTopology& tree) {
  const int num_nodes = tree.num_nodes();
  if (solution.groups.empty() ||
      solution.group_of.size() != static_cast<size_t>(num_nodes) + 1) {
    throw UsageError("solution is missing group bookkeeping; call solve first");
  }
  if (grad_z.rows() != solution.z.rows() || grad_z.cols() != num_nodes ||
      grad_a.size() != num_nodes) {
    throw ArgumentError("solver.shape", "cotangent shapes do not match solution");
  }

  const double tol = config.interior_tolerance;
  const Eigen::Index n = solution.z.rows();
  Eigen::MatrixXd grad_q = Eigen::MatrixXd::Zero(n, num_nodes);

  // Per-group bucket: grad_a plus the grad_z mass of entries pinned at the
  // upper boundary z = a_t.
  std::vector<double> bucket(solution.groups.size(), 0.0);
  for (int t = 1; t <= num_nodes; ++t) {
    bucket[solution.group_of[t]] += grad_a(t - 1);
  }
  for (int t = 1; t <= num_nodes; ++t) {
    const double at = solution.a(t - 1);
    const bool node_active = at > tol;
    const int g = solution.group_of[t];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double zit = solution.z(i, t - 1);
      if (node_active && zit >= at - tol) {
        bucket[g] += grad_z(i, t - 1);  // dz/da = 1 at the upper boundary
      } else if (zit > tol && zit < at - tol) {
        grad_q(i, t - 1) += grad_z(i, t - 1);  // dz/dq = 1 on the interior
      }
      // pinned at zero otherwise: zero gradient
    }
  }

  for (size_t gi = 0; gi < solution.groups.size(); ++gi) {
    const PooledGroup& g = solution.groups[gi];
    if (g.clipped || g.value <= tol || g.value >= 1.0 - tol) continue;
    const double scale =
        bucket[gi] / (config.lambda * static_cast<double>(g.nodes.size()) +
                      static_cast<double>(g.k_star));
    if (scale == 0.0) continue;
    for (const SupportPair& s : g.support) {
      grad_q(s.point, s.node - 1) += scale;
    }
  }
  return grad_q;
}

double tree_program_objective(const Eigen::MatrixXd& q,
                              const Eigen::MatrixXd& z,
                              const Eigen::VectorXd& a, double lambda) {
  const double fit = (z - (q.array() + 0.5).matrix()).squaredNorm();
  return 0.5 * lambda * a.squaredNorm() + 0.5 * fit;
}

}  // namespace difftree
