#include "crbsde/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace crbsde {

namespace {

void check_linear_shapes(const ScenarioTree& tree, const LinearDriver& ld) {
  const int N = tree.num_steps();
  if (ld.a.num_levels() < N || ld.b.num_levels() < N || ld.c.num_levels() < N)
    throw precondition_error("linear driver: need slope/offset values on 0..N-1");
  for (int k = 0; k < N; ++k)
    if (ld.a.levels[k].size() != tree.node_count(k) ||
        ld.b.levels[k].size() != tree.node_count(k) ||
        ld.c.levels[k].size() != tree.node_count(k))
      throw precondition_error("linear driver: level " + std::to_string(k) +
                               " does not match the tree");
}

void require_adapted_slopes(const SubFiltration& filt, const LinearDriver& ld) {
  for (int k = 0; k < static_cast<int>(ld.a.levels.size()); ++k) {
    if (atom_constancy_gap(filt, k, ld.a.levels[k]) > 1e-12 ||
        atom_constancy_gap(filt, k, ld.b.levels[k]) > 1e-12)
      throw precondition_error(
          "linear driver: slope processes vary inside an atom at level " +
          std::to_string(k));
  }
}

}  // namespace

double LinearDriver::slope_bound() const {
  double m = 0.0;
  for (const auto& lv : a.levels) if (lv.size()) m = std::max(m, lv.abs().maxCoeff());
  for (const auto& lv : b.levels) if (lv.size()) m = std::max(m, lv.abs().maxCoeff());
  return m;
}

Driver LinearDriver::as_driver() const {
  Driver d;
  d.f = [a = a, b = b, c = c](int level, int node, double y, double z) {
    return a.levels[level](node) * y + b.levels[level](node) * z +
           c.levels[level](node);
  };
  d.lipschitz = slope_bound();
  d.depends_on_yz = true;
  return d;
}

GammaProcess gamma_process(const ScenarioTree& tree, const SubFiltration& filt,
                           const LinearDriver& ld) {
  check_linear_shapes(tree, ld);
  const int N = tree.num_steps();
  const double dt = tree.dt();
  GammaProcess g;
  g.gamma = make_f_process(tree, N);
  g.gamma.levels[0](0) = 1.0;
  for (int k = 0; k < N; ++k) {
    const TreeLevel& next = tree.level(k + 1);
    for (int c = 0; c < tree.node_count(k + 1); ++c) {
      const int p = next.parent[c];
      const double factor =
          1.0 + ld.a.levels[k](p) * dt + ld.b.levels[k](p) * next.branch_db(c);
      if (factor <= 0.0)
        throw numerical_error(
            "gamma_process: nonpositive branch factor at level " + std::to_string(k) +
            " (degenerate exponential)");
      g.gamma.levels[k + 1](c) = g.gamma.levels[k](p) * factor;
    }
  }
  g.adapt_gap = 0.0;
  for (int k = 0; k <= N; ++k)
    g.adapt_gap = std::max(g.adapt_gap,
                           atom_constancy_gap(filt, k, g.gamma.levels[k]));
  g.g_adapted = g.adapt_gap <= 1e-12;
  return g;
}

SolutionTriple solve_linear(const DCRBSDEProblem& p, const LinearDriver& ld) {
  const ScenarioTree& tree = *p.tree;
  const SubFiltration& filt = *p.filt;
  const int N = tree.num_steps();
  const double dt = tree.dt();
  check_linear_shapes(tree, ld);
  require_adapted_slopes(filt, ld);
  {
    DCRBSDEProblem q = p;
    q.driver = ld.as_driver();
    validate_problem(q);
  }
  if (ld.slope_bound() * dt >= 1.0)
    throw precondition_error("solve_linear: slope * dt >= 1");

  SolutionTriple s;
  s.y = make_f_process(tree, N);
  s.z = make_f_process(tree, N - 1);
  s.y.levels[N] = p.terminal;
  std::vector<ArrayXd> dkp(N), dkm(N);
  for (int k = N - 1; k >= 0; --k) {
    s.z.levels[k] = martingale_coeff(tree, k + 1, s.y.levels[k + 1]);
    const ArrayXd m0 = cond_expect_F(tree, k + 1, s.y.levels[k + 1]);
    // Unconstrained solve of y (1 - a dt) = m0 + (b z + c) dt, then the
    // atom-level clip; the regulator absorbs (clip - mean) * (1 - a dt).
    const ArrayXd rhs =
        m0 + (ld.b.levels[k] * s.z.levels[k] + ld.c.levels[k]) * dt;
    const ArrayXd scale = 1.0 - ld.a.levels[k] * dt;
    const ArrayXd unconstrained = rhs / scale;
    const ArrayXd m = cond_expect_G(tree, filt, k, unconstrained);
    const ArrayXd lbar = cond_expect_G(tree, filt, k, p.lower.levels[k]);
    const ArrayXd ubar = cond_expect_G(tree, filt, k, p.upper.levels[k]);
    const ArrayXd clipped = m.max(lbar).min(ubar);
    // scale is atom-constant; read it per atom to convert mean corrections
    ArrayXd scale_atom(filt.atom_count(k));
    for (int a = 0; a < filt.atom_count(k); ++a)
      scale_atom(a) = scale(filt.atom_members(k, a).front());
    const ArrayXd dk_atom = (clipped - m) * scale_atom;
    dkp[k] = dk_atom.max(0.0);
    dkm[k] = (-dk_atom).max(0.0);
    s.y.levels[k] = (rhs + lift_to_nodes(filt, k, dk_atom)) / scale;
  }
  s.k_plus.tag = s.k_minus.tag = Filt::G;
  s.k_plus.levels.resize(N + 1);
  s.k_minus.levels.resize(N + 1);
  s.k_plus.levels[0] = ArrayXd::Zero(filt.atom_count(0));
  s.k_minus.levels[0] = ArrayXd::Zero(filt.atom_count(0));
  for (int k = 0; k < N; ++k) {
    const int next_atoms = filt.atom_count(k + 1);
    s.k_plus.levels[k + 1] = ArrayXd::Zero(next_atoms);
    s.k_minus.levels[k + 1] = ArrayXd::Zero(next_atoms);
    for (int a = 0; a < next_atoms; ++a) {
      const int pa = filt.atom_parent(k + 1, a);
      s.k_plus.levels[k + 1](a) = s.k_plus.levels[k](pa) + dkp[k](pa);
      s.k_minus.levels[k + 1](a) = s.k_minus.levels[k](pa) + dkm[k](pa);
    }
  }
  s.iterations = 1;
  {
    DCRBSDEProblem q = p;
    q.driver = ld.as_driver();
    s.diagnostics = verify_solution(q, s);
  }
  return s;
}

AdaptedProcess stopped_value(const ScenarioTree& tree, const SubFiltration& filt,
                             const LinearDriver& ld, const ArrayXd& terminal,
                             const AdaptedProcess& lower, const AdaptedProcess& upper,
                             const StoppingTime& tau, const StoppingTime& sigma) {
  const int N = tree.num_steps();
  const double dt = tree.dt();
  check_linear_shapes(tree, ld);
  if (!is_g_stopping_time(tree, filt, tau) || !is_g_stopping_time(tree, filt, sigma))
    throw precondition_error("stopped_value: invalid stopping times");

  // Stop level and frozen payoff per leaf; both are constant over the
  // subtree below the stopped node.
  std::vector<int> stop(tree.leaf_count());
  ArrayXd payoff(tree.leaf_count());
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    const int ta = tau.level_of_leaf[leaf], ts = sigma.level_of_leaf[leaf];
    const int s = std::min(ta, ts);
    stop[leaf] = s;
    if (s == N)
      payoff(leaf) = terminal(leaf);
    else if (ta <= ts)
      payoff(leaf) = lower.levels[ta](tree.ancestor(leaf, ta));
    else
      payoff(leaf) = upper.levels[ts](tree.ancestor(leaf, ts));
  }

  // Representative leaf per node, to read the (atom-determined) stop state.
  std::vector<std::vector<int>> first_leaf(N + 1);
  first_leaf[N].resize(tree.leaf_count());
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) first_leaf[N][leaf] = leaf;
  for (int k = N - 1; k >= 0; --k) {
    first_leaf[k].resize(tree.node_count(k));
    for (int i = 0; i < tree.node_count(k); ++i)
      first_leaf[k][i] = first_leaf[k + 1][tree.children(k, i).first];
  }

  AdaptedProcess y = make_f_process(tree, N);
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) y.levels[N](leaf) = payoff(leaf);
  for (int k = N - 1; k >= 0; --k) {
    const ArrayXd z = martingale_coeff(tree, k + 1, y.levels[k + 1]);
    const ArrayXd m0 = cond_expect_F(tree, k + 1, y.levels[k + 1]);
    for (int i = 0; i < tree.node_count(k); ++i) {
      const int rep = first_leaf[k][i];
      if (stop[rep] <= k) {
        y.levels[k](i) = payoff(rep);
      } else {
        const double scale = 1.0 - ld.a.levels[k](i) * dt;
        if (scale <= 0.0)
          throw precondition_error("stopped_value: slope * dt >= 1");
        y.levels[k](i) =
            (m0(i) + (ld.b.levels[k](i) * z(i) + ld.c.levels[k](i)) * dt) / scale;
      }
    }
  }
  return y;
}

SaddlePoint saddle_point(const ScenarioTree& tree, const SubFiltration& filt,
                         const SolutionTriple& sol, const AdaptedProcess& lower,
                         const AdaptedProcess& upper, int from_level,
                         double slack_tol) {
  const int N = tree.num_steps();
  if (from_level < 0 || from_level > N)
    throw precondition_error("saddle_point: level out of range");
  std::vector<ArrayXd> slack_lo(N + 1), slack_hi(N + 1);
  for (int k = 0; k <= N; ++k) {
    const ArrayXd ybar = cond_expect_G(tree, filt, k, sol.y.levels[k]);
    slack_lo[k] = ybar - cond_expect_G(tree, filt, k, lower.levels[k]);
    slack_hi[k] = cond_expect_G(tree, filt, k, upper.levels[k]) - ybar;
  }
  SaddlePoint sp;
  sp.tau_star.level_of_leaf.assign(tree.leaf_count(), N);
  sp.sigma_star.level_of_leaf.assign(tree.leaf_count(), N);
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    for (int k = from_level; k <= N; ++k) {
      if (slack_lo[k](filt.atom_of(k, tree.ancestor(leaf, k))) <= slack_tol) {
        sp.tau_star.level_of_leaf[leaf] = k;
        break;
      }
    }
    for (int k = from_level; k <= N; ++k) {
      if (slack_hi[k](filt.atom_of(k, tree.ancestor(leaf, k))) <= slack_tol) {
        sp.sigma_star.level_of_leaf[leaf] = k;
        break;
      }
    }
  }
  return sp;
}

CompareReport compare(const DCRBSDEProblem& p1, const LinearDriver& d1,
                      const DCRBSDEProblem& p2, const LinearDriver& d2) {
  if (p1.tree != p2.tree || p1.filt != p2.filt)
    throw precondition_error("compare: problems live on different spaces");
  const ScenarioTree& tree = *p1.tree;
  const SubFiltration& filt = *p1.filt;
  const int N = tree.num_steps();
  for (int k = 0; k < N; ++k)
    if ((d1.a.levels[k] - d2.a.levels[k]).abs().maxCoeff() > 0.0 ||
        (d1.b.levels[k] - d2.b.levels[k]).abs().maxCoeff() > 0.0)
      throw precondition_error("compare: slope processes differ at level " +
                               std::to_string(k));
  const GammaProcess g = gamma_process(tree, filt, d1);
  if (!g.g_adapted)
    throw precondition_error(
        "compare: the multiplicative weight is not adapted to the subfiltration");

  std::string violations;
  auto check_order = [&](const ArrayXd& hi, const ArrayXd& lo, int level,
                         const char* what) {
    for (int a = 0; a < hi.size(); ++a)
      if (hi(a) < lo(a) - 1e-12)
        violations += std::string(" [") + what + " level " + std::to_string(level) +
                      " atom " + std::to_string(a) + "]";
  };
  check_order(cond_expect_G(tree, filt, N, p1.terminal),
              cond_expect_G(tree, filt, N, p2.terminal), N, "terminal");
  for (int k = 0; k <= N; ++k) {
    check_order(cond_expect_G(tree, filt, k, p1.lower.levels[k]),
                cond_expect_G(tree, filt, k, p2.lower.levels[k]), k, "lower");
    check_order(cond_expect_G(tree, filt, k, p1.upper.levels[k]),
                cond_expect_G(tree, filt, k, p2.upper.levels[k]), k, "upper");
    if (k < N)
      check_order(cond_expect_G(tree, filt, k, d1.c.levels[k]),
                  cond_expect_G(tree, filt, k, d2.c.levels[k]), k, "offset");
  }
  if (!violations.empty())
    throw precondition_error("compare: inputs are not conditionally ordered:" +
                             violations);

  const SolutionTriple s1 = solve_linear(p1, d1);
  const SolutionTriple s2 = solve_linear(p2, d2);
  CompareReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= N; ++k) {
    const ArrayXd m = cond_expect_G(tree, filt, k, s1.y.levels[k]) -
                      cond_expect_G(tree, filt, k, s2.y.levels[k]);
    Eigen::Index at = 0;
    const double mn = m.minCoeff(&at);
    if (mn < rep.min_margin) {
      rep.min_margin = mn;
      rep.argmin_level = k;
      rep.argmin_atom = static_cast<int>(at);
    }
  }
  return rep;
}

}  // namespace crbsde
