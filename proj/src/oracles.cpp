#include "difftree/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "difftree/errors.hpp"
#include "difftree/solver.hpp"

namespace difftree {

namespace {

// Projection of (u, v) onto the halfspace u <= v.
inline void project_halfspace(double& u, double& v) {
  if (u > v) {
    const double mid = 0.5 * (u + v);
    u = mid;
    v = mid;
  }
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::VectorXd> qp_oracle(const Eigen::MatrixXd& q,
                                                      double lambda,
                                                      const TreeTopology& tree,
                                                      const OracleConfig& cfg) {
  if (!(lambda > 0.0)) {
    throw ConfigError("config.lambda", "lambda must be > 0");
  }
  if (q.cols() != tree.num_nodes()) {
    throw ArgumentError("oracle.shape", "q column count does not match tree");
  }
  if (!(cfg.pg_step > 0.0)) {
    throw ConfigError("config.pg_step", "pg_step must be > 0");
  }

  const Eigen::Index n = q.rows();
  const int num_nodes = tree.num_nodes();
  const double step = std::min(cfg.pg_step, 1.0 / std::max(1.0, lambda));
  const Eigen::MatrixXd target = q.array() + 0.5;

  // Feasible start.
  Eigen::MatrixXd z = target.cwiseMax(0.0).cwiseMin(1.0);
  Eigen::VectorXd a = Eigen::VectorXd::Ones(num_nodes);

  // Dykstra correction memory, one slot per constraint set: the global box,
  // one halfspace per (i, t) for z_it <= a_t, one per edge for a_t <= a_p(t).
  Eigen::MatrixXd box_cz(n, num_nodes);
  Eigen::VectorXd box_ca(num_nodes);
  Eigen::MatrixXd hz_cz(n, num_nodes), hz_ca(n, num_nodes);
  Eigen::MatrixXd edge_ct(num_nodes, 1), edge_cp(num_nodes, 1);

  auto dykstra_project = [&](Eigen::MatrixXd& pz, Eigen::VectorXd& pa) {
    box_cz.setZero();
    box_ca.setZero();
    hz_cz.setZero();
    hz_ca.setZero();
    edge_ct.setZero();
    edge_cp.setZero();
    for (int sweep = 0; sweep < cfg.dykstra_iters; ++sweep) {
      double change = 0.0;
      // Box [0, 1] on every coordinate.
      for (Eigen::Index t = 0; t < num_nodes; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double y = pz(i, t) + box_cz(i, t);
          const double p = std::clamp(y, 0.0, 1.0);
          box_cz(i, t) = y - p;
          change = std::max(change, std::abs(p - pz(i, t)));
          pz(i, t) = p;
        }
        const double ya = pa(t) + box_ca(t);
        const double paof = std::clamp(ya, 0.0, 1.0);
        box_ca(t) = ya - paof;
        change = std::max(change, std::abs(paof - pa(t)));
        pa(t) = paof;
      }
      // z_it <= a_t halfspaces.
      for (Eigen::Index t = 0; t < num_nodes; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) {
          double u = pz(i, t) + hz_cz(i, t);
          double v = pa(t) + hz_ca(i, t);
          const double u0 = u, v0 = v;
          project_halfspace(u, v);
          hz_cz(i, t) = u0 - u;
          hz_ca(i, t) = v0 - v;
          change = std::max({change, std::abs(u - pz(i, t)),
                             std::abs(v - pa(t))});
          pz(i, t) = u;
          pa(t) = v;
        }
      }
      // a_t <= a_p(t) halfspaces.
      for (int t = 2; t <= num_nodes; ++t) {
        const int p = TreeTopology::parent(t);
        double u = pa(t - 1) + edge_ct(t - 1, 0);
        double v = pa(p - 1) + edge_cp(t - 1, 0);
        const double u0 = u, v0 = v;
        project_halfspace(u, v);
        edge_ct(t - 1, 0) = u0 - u;
        edge_cp(t - 1, 0) = v0 - v;
        change = std::max({change, std::abs(u - pa(t - 1)),
                           std::abs(v - pa(p - 1))});
        pa(t - 1) = u;
        pa(p - 1) = v;
      }
      if (change < 1e-15) break;
    }
  };

  std::deque<double> recent;
  bool converged = false;
  for (int iter = 0; iter < cfg.pg_iters; ++iter) {
    z -= step * (z - target);
    a -= (step * lambda) * a;
    dykstra_project(z, a);

    const double obj = tree_program_objective(q, z, a, lambda);
    recent.push_back(obj);
    if (recent.size() > 100) {
      const double before = recent.front();
      recent.pop_front();
      if (before - obj < 1e-12) {
        converged = true;
        break;
      }
    }
  }
  if (!converged) {
    throw OracleFailure("projected-gradient oracle exhausted " +
                        std::to_string(cfg.pg_iters) +
                        " iterations without converging");
  }
  return {std::move(z), std::move(a)};
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> mip_oracle(const Eigen::MatrixXd& q,
                                                       double lambda,
                                                       const TreeTopology& tree) {
  const int num_nodes = tree.num_nodes();
  if (num_nodes > 15) {
    throw ArgumentError("oracle.size",
                        "mip oracle enumerates at most 15 nodes, got " +
                            std::to_string(num_nodes));
  }
  if (q.cols() != num_nodes) {
    throw ArgumentError("oracle.shape", "q column count does not match tree");
  }

  // Per-node payoff of activating it: sum of positive rewards.
  Eigen::VectorXd payoff(num_nodes);
  for (int t = 0; t < num_nodes; ++t) {
    payoff(t) = q.col(t).cwiseMax(0.0).sum();
  }

  std::vector<char> active(num_nodes + 1, 0);
  std::vector<char> best;
  double best_score = -std::numeric_limits<double>::infinity();
  int best_count = 0;

  auto consider = [&]() {
    double score = 0.0;
    int count = 0;
    for (int t = 1; t <= num_nodes; ++t) {
      if (active[t]) {
        score += payoff(t - 1);
        ++count;
      }
    }
    score -= 0.5 * lambda * count;
    const std::vector<char> current(active.begin() + 1, active.end());
    const bool better =
        score > best_score ||
        (score == best_score &&
         (count < best_count || (count == best_count && current < best)));
    if (better) {
      best_score = score;
      best_count = count;
      best = current;
    }
  };

  // Depth-first over node ids; a node may be active only under an active
  // parent, which enumerates exactly the hierarchical binary vectors.
  auto rec = [&](auto&& self, int t) -> void {
    if (t > num_nodes) {
      consider();
      return;
    }
    active[t] = 0;
    self(self, t + 1);
    if (t == 1 || active[TreeTopology::parent(t)]) {
      active[t] = 1;
      self(self, t + 1);
      active[t] = 0;
    }
  };
  rec(rec, 1);

  Eigen::VectorXd a(num_nodes);
  for (int t = 0; t < num_nodes; ++t) a(t) = best[t];
  Eigen::MatrixXd z(q.rows(), num_nodes);
  for (int t = 0; t < num_nodes; ++t) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      z(i, t) = (a(t) > 0.0 && q(i, t) > 0.0) ? 1.0 : 0.0;
    }
  }
  return {std::move(z), std::move(a)};
}

double scalar_grid_oracle(double lambda, int group_size,
                          std::span<const double> values, double grid_step) {
  if (!(grid_step > 0.0)) {
    throw ConfigError("config.grid_step", "grid_step must be > 0");
  }
  std::vector<double> asc(values.begin(), values.end());
  std::sort(asc.begin(), asc.end());
  const int m = static_cast<int>(asc.size());

  // Suffix sums let g(a) be evaluated in O(1) given the active-set cut.
  std::vector<double> suf_sum(m + 1, 0.0), suf_sq(m + 1, 0.0);
  for (int j = m - 1; j >= 0; --j) {
    suf_sum[j] = suf_sum[j + 1] + asc[j];
    suf_sq[j] = suf_sq[j + 1] + asc[j] * asc[j];
  }
  const double lead = 0.5 * lambda * group_size;
  auto eval_at_cut = [&](double x, int cut) {
    const double k = static_cast<double>(m - cut);
    return lead * x * x +
           0.5 * (k * x * x - 2.0 * x * suf_sum[cut] + suf_sq[cut]);
  };

  const long steps = std::lround(1.0 / grid_step);
  double best_x = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  int cut = 0;  // first index with asc[cut] >= x
  for (long s = 0; s <= steps; ++s) {
    const double x = static_cast<double>(s) / static_cast<double>(steps);
    while (cut < m && asc[cut] < x) ++cut;
    const double val = eval_at_cut(x, cut);
    if (val < best_val) {
      best_val = val;
      best_x = x;
    }
  }

  auto eval = [&](double x) {
    int c = static_cast<int>(std::lower_bound(asc.begin(), asc.end(), x) -
                             asc.begin());
    return eval_at_cut(x, c);
  };
  double lo = std::max(0.0, best_x - grid_step);
  double hi = std::min(1.0, best_x + grid_step);
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (eval(m1) <= eval(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return 0.5 * (lo + hi);
}

Eigen::MatrixXd finite_diff(
    const std::function<double(const Eigen::MatrixXd&)>& fn,
    const Eigen::MatrixXd& at, double h) {
  if (!(h > 0.0)) {
    throw ArgumentError("oracle.h", "finite-difference step must be > 0");
  }
  Eigen::MatrixXd grad(at.rows(), at.cols());
  Eigen::MatrixXd x = at;
  for (Eigen::Index c = 0; c < at.cols(); ++c) {
    for (Eigen::Index r = 0; r < at.rows(); ++r) {
      const double orig = x(r, c);
      x(r, c) = orig + h;
      const double up = fn(x);
      x(r, c) = orig - h;
      const double down = fn(x);
      x(r, c) = orig;
      grad(r, c) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

int lca(int u, int v) {
  while (u != v) {
    if (u > v) {
      u = TreeTopology::parent(u);
    } else {
      v = TreeTopology::parent(v);
    }
  }
  return u;
}

double dendrogram_purity_oracle(const std::vector<int>& assigned_node,
                                const std::vector<int>& labels,
                                const TreeTopology& tree) {
  const size_t n = assigned_node.size();
  if (labels.size() != n) {
    throw ArgumentError("purity.shape", "assignments and labels differ in size");
  }
  for (int t : assigned_node) tree.check_node(t);

  auto in_subtree = [&](int node, int root) {
    while (node > root) node = TreeTopology::parent(node);
    return node == root;
  };

  double total = 0.0;
  long pairs = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (labels[i] != labels[j]) continue;
      const int root = lca(assigned_node[i], assigned_node[j]);
      long same = 0, all = 0;
      for (size_t k = 0; k < n; ++k) {
        if (in_subtree(assigned_node[k], root)) {
          ++all;
          if (labels[k] == labels[i]) ++same;
        }
      }
      total += static_cast<double>(same) / static_cast<double>(all);
      ++pairs;
    }
  }
  if (pairs == 0) {
    throw ArgumentError("purity.no_pairs",
                        "dendrogram purity undefined: every class is a singleton");
  }
  return total / static_cast<double>(pairs);
}

}  // namespace difftree
