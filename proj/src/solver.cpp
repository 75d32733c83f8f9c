#include "crbsde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace crbsde {

Driver constant_driver(double value) {
  Driver d;
  d.f = [value](int, int, double, double) { return value; };
  d.lipschitz = 0.0;
  d.depends_on_yz = false;
  return d;
}

Driver process_driver(AdaptedProcess values) {
  Driver d;
  d.f = [v = std::move(values)](int level, int node, double, double) {
    return v.levels[level](node);
  };
  d.lipschitz = 0.0;
  d.depends_on_yz = false;
  return d;
}

namespace {

void check_f_shape(const ScenarioTree& tree, const AdaptedProcess& p, int up_to,
                   const char* what) {
  if (p.num_levels() < up_to + 1)
    throw precondition_error(std::string(what) + ": missing levels");
  for (int k = 0; k <= up_to; ++k)
    if (p.levels[k].size() != tree.node_count(k))
      throw precondition_error(std::string(what) + ": level " + std::to_string(k) +
                               " does not match the tree");
}

}  // namespace

void validate_problem(const DCRBSDEProblem& p) {
  if (!p.tree || !p.filt) throw precondition_error("problem: tree or filtration missing");
  const ScenarioTree& tree = *p.tree;
  const int N = tree.num_steps();
  if (p.terminal.size() != tree.leaf_count())
    throw precondition_error("problem: terminal values do not match the leaves");
  check_f_shape(tree, p.lower, N, "lower obstacle");
  check_f_shape(tree, p.upper, N, "upper obstacle");
  if (!p.driver.f) throw precondition_error("problem: driver not set");

  // (H2) strict separation, pathwise.
  for (int k = 0; k <= N; ++k) {
    const ArrayXd gap = p.upper.levels[k] - p.lower.levels[k];
    if (gap.minCoeff() <= 0.0) {
      Eigen::Index at = 0;
      gap.minCoeff(&at);
      throw precondition_error("problem: obstacle separation fails at level " +
                               std::to_string(k) + " node " + std::to_string(at));
    }
  }
  // (H3) conditional terminal sandwich.
  const ArrayXd xi_bar = cond_expect_G(tree, *p.filt, N, p.terminal);
  const ArrayXd l_bar = cond_expect_G(tree, *p.filt, N, p.lower.levels[N]);
  const ArrayXd u_bar = cond_expect_G(tree, *p.filt, N, p.upper.levels[N]);
  for (int a = 0; a < xi_bar.size(); ++a) {
    if (xi_bar(a) < l_bar(a) - 1e-12 || xi_bar(a) > u_bar(a) + 1e-12)
      throw precondition_error(
          "problem: terminal sandwich (H3) fails on atom " + std::to_string(a) +
          " at level " + std::to_string(N));
  }
  // (H1) declared Lipschitz constant, validated by random probes.
  std::mt19937_64 eng(0x51f7c0de);
  std::uniform_real_distribution<double> val(-3.0, 3.0);
  for (int probe = 0; probe < 64; ++probe) {
    const int k = static_cast<int>(eng() % static_cast<unsigned>(N));
    const int node = static_cast<int>(eng() % static_cast<unsigned>(tree.node_count(k)));
    const double y1 = val(eng), y2 = val(eng), z1 = val(eng), z2 = val(eng);
    const double lhs = std::abs(p.driver.f(k, node, y1, z1) - p.driver.f(k, node, y2, z2));
    const double rhs =
        p.driver.lipschitz * (std::abs(y1 - y2) + std::abs(z1 - z2));
    if (lhs > rhs * (1.0 + 1e-9) + 1e-12)
      throw precondition_error(
          "problem: driver violates its declared Lipschitz bound (H1) at level " +
          std::to_string(k));
  }
}

namespace {

// Shared backward pass with frozen driver values: the clipped conditional
// recursion at atom level, regulator increments from the clip corrections,
// then the nodewise lift of Y and the representation coefficient Z.
SolutionTriple solve_with_values(const DCRBSDEProblem& p,
                                 const std::vector<ArrayXd>& fvals) {
  const ScenarioTree& tree = *p.tree;
  const SubFiltration& filt = *p.filt;
  const int N = tree.num_steps();
  const double dt = tree.dt();

  std::vector<ArrayXd> ybar(N + 1), dkp(N), dkm(N);
  ybar[N] = cond_expect_G(tree, filt, N, p.terminal);
  for (int k = N - 1; k >= 0; --k) {
    const ArrayXd lbar = cond_expect_G(tree, filt, k, p.lower.levels[k]);
    const ArrayXd ubar = cond_expect_G(tree, filt, k, p.upper.levels[k]);
    const ArrayXd fbar = cond_expect_G(tree, filt, k, fvals[k]);
    const ArrayXd cont = cond_expect_atom(filt, k + 1, ybar[k + 1]) + fbar * dt;
    dkp[k] = (lbar - cont).max(0.0);
    dkm[k] = (cont - ubar).max(0.0);
    ybar[k] = cont + dkp[k] - dkm[k];
  }

  SolutionTriple s;
  s.y = make_f_process(tree, N);
  s.z = make_f_process(tree, N - 1);
  s.y.levels[N] = p.terminal;
  for (int k = N - 1; k >= 0; --k) {
    s.z.levels[k] = martingale_coeff(tree, k + 1, s.y.levels[k + 1]);
    s.y.levels[k] = cond_expect_F(tree, k + 1, s.y.levels[k + 1]) + fvals[k] * dt +
                    lift_to_nodes(filt, k, dkp[k] - dkm[k]);
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
  return s;
}

std::vector<ArrayXd> driver_values_at(const DCRBSDEProblem& p, const AdaptedProcess& y,
                                      const AdaptedProcess& z) {
  const ScenarioTree& tree = *p.tree;
  const int N = tree.num_steps();
  std::vector<ArrayXd> fv(N);
  for (int k = 0; k < N; ++k) {
    fv[k] = ArrayXd::Zero(tree.node_count(k));
    for (int i = 0; i < tree.node_count(k); ++i)
      fv[k](i) = p.driver.f(k, i, y.levels[k](i), z.levels[k](i));
  }
  return fv;
}

double beta_norm_sq(const ScenarioTree& tree, double beta, const AdaptedProcess& dy,
                    const AdaptedProcess& dz) {
  double acc = 0.0;
  const double dt = tree.dt();
  for (int k = 0; k < tree.num_steps(); ++k) {
    const ArrayXd& w = tree.level(k).path_prob;
    acc += std::exp(beta * tree.time_at(k)) * dt *
           ((w * dy.levels[k].square()).sum() + (w * dz.levels[k].square()).sum());
  }
  return acc;
}

}  // namespace

SolutionTriple solve_constant_driver(const DCRBSDEProblem& p) {
  validate_problem(p);
  const ScenarioTree& tree = *p.tree;
  if (p.driver.depends_on_yz)
    throw precondition_error(
        "solve_constant_driver: driver is declared to depend on (y, z)");
  std::vector<ArrayXd> fv(tree.num_steps());
  for (int k = 0; k < tree.num_steps(); ++k) {
    fv[k] = ArrayXd::Zero(tree.node_count(k));
    for (int i = 0; i < tree.node_count(k); ++i) fv[k](i) = p.driver.f(k, i, 0.0, 0.0);
  }
  SolutionTriple s = solve_with_values(p, fv);
  s.iterations = 1;
  s.diagnostics = verify_solution(p, s);
  return s;
}

SolutionTriple solve_picard(const DCRBSDEProblem& p, const PicardOptions& opt) {
  validate_problem(p);
  const ScenarioTree& tree = *p.tree;
  const int N = tree.num_steps();
  if (p.driver.lipschitz * tree.dt() >= 1.0)
    throw precondition_error(
        "solve_picard: lipschitz * dt >= 1; the implicit driver step is not "
        "well posed at this resolution");
  const double beta = 4.0 * p.driver.lipschitz * p.driver.lipschitz + 1.0;

  AdaptedProcess y_prev = make_f_process(tree, N);
  AdaptedProcess z_prev = make_f_process(tree, N - 1);
  std::vector<double> gaps;
  for (int m = 0; m < opt.max_iterations; ++m) {
    SolutionTriple s = solve_with_values(p, driver_values_at(p, y_prev, z_prev));
    AdaptedProcess dy = s.y, dz = s.z;
    double sup = 0.0;
    for (int k = 0; k < N; ++k) {
      dy.levels[k] -= y_prev.levels[k];
      dz.levels[k] -= z_prev.levels[k];
      sup = std::max(sup, dy.levels[k].abs().maxCoeff());
      sup = std::max(sup, dz.levels[k].abs().maxCoeff());
    }
    dy.levels[N] -= y_prev.levels[N];
    sup = std::max(sup, dy.levels[N].abs().maxCoeff());
    const double gap_sq = beta_norm_sq(tree, beta, dy, dz);
    gaps.push_back(gap_sq);
    y_prev = s.y;
    z_prev = s.z;
    if (std::sqrt(gap_sq) < opt.beta_norm_tol && sup < opt.sup_tol) {
      s.picard_gaps = std::move(gaps);
      s.iterations = m + 1;
      s.diagnostics = verify_solution(p, s);
      return s;
    }
  }
  throw numerical_error(
      "solve_picard: no contraction after " + std::to_string(opt.max_iterations) +
      " iterations; lipschitz * dt may be too large, consider refining the grid");
}

SolutionTriple solve_penalized(const DCRBSDEProblem& p, double n) {
  validate_problem(p);
  const ScenarioTree& tree = *p.tree;
  const SubFiltration& filt = *p.filt;
  const int N = tree.num_steps();
  const double dt = tree.dt();
  if (n < 0.0) throw precondition_error("solve_penalized: negative penalty level");
  if (p.driver.lipschitz * dt >= 1.0)
    throw precondition_error("solve_penalized: lipschitz * dt >= 1");

  SolutionTriple s;
  s.y = make_f_process(tree, N);
  s.z = make_f_process(tree, N - 1);
  s.y.levels[N] = p.terminal;
  s.k_plus.tag = s.k_minus.tag = Filt::G;
  s.k_plus.levels.resize(N + 1);
  s.k_minus.levels.resize(N + 1);
  std::vector<ArrayXd> dkp(N), dkm(N);

  const double r = n * dt;  // penalty charge per step
  for (int k = N - 1; k >= 0; --k) {
    const ArrayXd m0 = cond_expect_F(tree, k + 1, s.y.levels[k + 1]);
    s.z.levels[k] = martingale_coeff(tree, k + 1, s.y.levels[k + 1]);
    const ArrayXd lbar = cond_expect_G(tree, filt, k, p.lower.levels[k]);
    const ArrayXd ubar = cond_expect_G(tree, filt, k, p.upper.levels[k]);

    ArrayXd w = m0;  // candidate Y at this level
    ArrayXd delta;
    for (int it = 0;; ++it) {
      if (it > 500)
        throw numerical_error("solve_penalized: level iteration did not settle");
      ArrayXd c = m0;
      for (int i = 0; i < tree.node_count(k); ++i)
        c(i) += p.driver.f(k, i, w(i), s.z.levels[k](i)) * dt;
      const ArrayXd cbar = cond_expect_G(tree, filt, k, c);
      // m = cbar + r (m - lbar)^- - r (m - ubar)^+ has one solution per
      // linear piece; pick by where cbar falls.
      ArrayXd m(cbar.size());
      for (int a = 0; a < cbar.size(); ++a) {
        if (cbar(a) < lbar(a))
          m(a) = (cbar(a) + r * lbar(a)) / (1.0 + r);
        else if (cbar(a) > ubar(a))
          m(a) = (cbar(a) + r * ubar(a)) / (1.0 + r);
        else
          m(a) = cbar(a);
      }
      delta = m - cbar;
      ArrayXd w_next = c + lift_to_nodes(filt, k, delta);
      const double move = (w_next - w).abs().maxCoeff();
      w.swap(w_next);
      if (move < 1e-13) break;
    }
    s.y.levels[k] = w;
    dkp[k] = delta.max(0.0);
    dkm[k] = (-delta).max(0.0);
  }

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
  s.diagnostics = verify_solution(p, s);
  return s;
}

std::vector<double> default_penalty_grid(const DCRBSDEProblem& p, int lo, int hi,
                                         bool scale_by_inv_dt) {
  const double scale = scale_by_inv_dt ? 1.0 / p.tree->dt() : 1.0;
  std::vector<double> grid;
  for (int e = lo; e <= hi; ++e) grid.push_back(std::ldexp(1.0, e) * scale);
  return grid;
}

PenalizationReport penalization_sweep(const DCRBSDEProblem& p,
                                      const std::vector<double>& n_grid) {
  const ScenarioTree& tree = *p.tree;
  const SubFiltration& filt = *p.filt;
  const int N = tree.num_steps();
  const SolutionTriple ref = solve_picard(p);

  PenalizationReport rep;
  for (double n : n_grid) {
    const SolutionTriple s = solve_penalized(p, n);
    double violation = 0.0;
    for (int k = 0; k <= N; ++k) {
      const ArrayXd ybar = cond_expect_G(tree, filt, k, s.y.levels[k]);
      const ArrayXd lbar = cond_expect_G(tree, filt, k, p.lower.levels[k]);
      const ArrayXd ubar = cond_expect_G(tree, filt, k, p.upper.levels[k]);
      violation = std::max(violation, (lbar - ybar).maxCoeff());
      violation = std::max(violation, (ybar - ubar).maxCoeff());
    }
    violation = std::max(violation, 0.0);
    double dist = 0.0;
    for (int k = 0; k <= N; ++k)
      dist = std::max(dist, (s.y.levels[k] - ref.y.levels[k]).abs().maxCoeff());
    rep.n.push_back(n);
    rep.violation.push_back(violation);
    rep.distance.push_back(dist);
  }

  // Log-log fit over the points with measurable violation.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (size_t i = 0; i < rep.n.size(); ++i) {
    if (rep.violation[i] <= 1e-14) continue;
    const double x = std::log(rep.n[i]), y = std::log(rep.violation[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  if (cnt >= 2 && sxx * cnt - sx * sx > 0)
    rep.fitted_slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  rep.all_feasible = cnt == 0;
  return rep;
}

SolveDiagnostics verify_solution(const DCRBSDEProblem& p, const SolutionTriple& s) {
  const ScenarioTree& tree = *p.tree;
  const SubFiltration& filt = *p.filt;
  const int N = tree.num_steps();
  const double dt = tree.dt();
  SolveDiagnostics d;

  // Regulators may arrive atom-indexed or node-indexed; node-indexed ones
  // are audited for atom constancy before being projected.
  auto as_atoms = [&](const AdaptedProcess& kproc) {
    if (kproc.tag == Filt::G) return kproc;
    AdaptedProcess g;
    g.tag = Filt::G;
    g.levels.resize(N + 1);
    for (int k = 0; k <= N; ++k) {
      d.k_adapt_gap = std::max(d.k_adapt_gap,
                               atom_constancy_gap(filt, k, kproc.levels[k]));
      g.levels[k] = cond_expect_G(tree, filt, k, kproc.levels[k]);
    }
    return g;
  };
  const AdaptedProcess kp = as_atoms(s.k_plus);
  const AdaptedProcess km = as_atoms(s.k_minus);
  d.k_adapted = d.k_adapt_gap <= 1e-12;

  d.k_min_increment = 0.0;
  for (int k = 0; k < N; ++k)
    for (int a = 0; a < filt.atom_count(k + 1); ++a) {
      const int pa = filt.atom_parent(k + 1, a);
      d.k_min_increment = std::min(d.k_min_increment,
                                   kp.levels[k + 1](a) - kp.levels[k](pa));
      d.k_min_increment = std::min(d.k_min_increment,
                                   km.levels[k + 1](a) - km.levels[k](pa));
    }

  // Branchwise dynamics defect with the driver read at the current level.
  d.dynamics_residual = 0.0;
  for (int k = 0; k < N; ++k) {
    const TreeLevel& next = tree.level(k + 1);
    for (int i = 0; i < tree.node_count(k); ++i) {
      const double fv = p.driver.f(k, i, s.y.levels[k](i), s.z.levels[k](i));
      const int atom = filt.atom_of(k, i);
      auto [cb, ce] = tree.children(k, i);
      for (int c = cb; c < ce; ++c) {
        const int catom = filt.atom_of(k + 1, c);
        const double dknet = (kp.levels[k + 1](catom) - km.levels[k + 1](catom)) -
                             (kp.levels[k](atom) - km.levels[k](atom));
        const double r = s.y.levels[k](i) - s.y.levels[k + 1](c) - fv * dt +
                         s.z.levels[k](i) * next.branch_db(c) - dknet;
        d.dynamics_residual = std::max(d.dynamics_residual, std::abs(r));
      }
    }
  }

  // Conditional constraint and flat-off masses per atom trajectory.
  d.constraint_slack = std::numeric_limits<double>::infinity();
  std::vector<ArrayXd> slack_lo(N + 1), slack_hi(N + 1);
  for (int k = 0; k <= N; ++k) {
    const ArrayXd ybar = cond_expect_G(tree, filt, k, s.y.levels[k]);
    slack_lo[k] = ybar - cond_expect_G(tree, filt, k, p.lower.levels[k]);
    slack_hi[k] = cond_expect_G(tree, filt, k, p.upper.levels[k]) - ybar;
    d.constraint_slack = std::min(d.constraint_slack, slack_lo[k].minCoeff());
    d.constraint_slack = std::min(d.constraint_slack, slack_hi[k].minCoeff());
  }
  d.flatoff_lower = d.flatoff_upper = 0.0;
  for (int g = 0; g < filt.atom_count(N); ++g) {
    std::vector<int> chain(N + 1);
    chain[N] = g;
    for (int k = N; k > 0; --k) chain[k - 1] = filt.atom_parent(k, chain[k]);
    double lo = 0.0, hi = 0.0;
    for (int k = 0; k < N; ++k) {
      const double dkp_k = kp.levels[k + 1](chain[k + 1]) - kp.levels[k](chain[k]);
      const double dkm_k = km.levels[k + 1](chain[k + 1]) - km.levels[k](chain[k]);
      lo += std::abs(slack_lo[k](chain[k]) * dkp_k);
      hi += std::abs(slack_hi[k](chain[k]) * dkm_k);
    }
    d.flatoff_lower = std::max(d.flatoff_lower, lo);
    d.flatoff_upper = std::max(d.flatoff_upper, hi);
  }
  return d;
}

std::pair<double, double> stability_estimate(const DCRBSDEProblem& p1,
                                             const DCRBSDEProblem& p2,
                                             const SolutionTriple& s1,
                                             const SolutionTriple& s2) {
  const ScenarioTree& tree = *p1.tree;
  const SubFiltration& filt = *p1.filt;
  if (p2.tree != p1.tree || p2.filt != p1.filt)
    throw precondition_error("stability_estimate: problems live on different spaces");
  const int N = tree.num_steps();
  const double dt = tree.dt();
  for (int k = 0; k <= N; ++k)
    if ((p1.lower.levels[k] - p2.lower.levels[k]).abs().maxCoeff() != 0.0 ||
        (p1.upper.levels[k] - p2.upper.levels[k]).abs().maxCoeff() != 0.0)
      throw precondition_error("stability_estimate: obstacle mismatch");

  double lhs = 0.0, rhs = 0.0;
  const ArrayXd& leaf_prob = tree.level(N).path_prob;
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    double sup_y = 0.0, sup_k = 0.0, sum_z = 0.0, sum_f = 0.0;
    for (int k = 0; k <= N; ++k) {
      const int node = tree.ancestor(leaf, k);
      const int atom = filt.atom_of(k, node);
      sup_y = std::max(sup_y,
                       std::abs(s1.y.levels[k](node) - s2.y.levels[k](node)));
      const double k1 = s1.k_plus.levels[k](atom) - s1.k_minus.levels[k](atom);
      const double k2 = s2.k_plus.levels[k](atom) - s2.k_minus.levels[k](atom);
      sup_k = std::max(sup_k, std::abs(k1 - k2));
      if (k == N) break;
      const double dz = s1.z.levels[k](node) - s2.z.levels[k](node);
      sum_z += dz * dz * dt;
      const double y2 = s2.y.levels[k](node), z2 = s2.z.levels[k](node);
      const double df = p1.driver.f(k, node, y2, z2) - p2.driver.f(k, node, y2, z2);
      sum_f += df * df * dt;
    }
    const double dxi = p1.terminal(leaf) - p2.terminal(leaf);
    lhs += leaf_prob(leaf) * (sup_y * sup_y + sum_z + sup_k * sup_k);
    rhs += leaf_prob(leaf) * (dxi * dxi + sum_f);
  }
  return {lhs, rhs};
}

}  // namespace crbsde
