#include "crbsde/skorokhod.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace crbsde {

namespace {

void check_instance(const ArrayXd& x, const BarrierPair& b) {
  if (x.size() == 0) throw precondition_error("skorokhod: empty path");
  if (b.lower.size() != x.size() || b.upper.size() != x.size())
    throw precondition_error("skorokhod: barrier length does not match path");
  if (!x.isFinite().all() || !b.lower.isFinite().all() || !b.upper.isFinite().all())
    throw precondition_error("skorokhod: non-finite input");
  if ((b.upper - b.lower).minCoeff() <= 0.0)
    throw precondition_error("skorokhod: invalid barriers (separation <= 0)");
}

ReflectedOutput from_net(const ArrayXd& x, const ArrayXd& k) {
  ReflectedOutput out;
  out.k = k;
  out.y = x + k;
  const auto n = x.size();
  out.k_plus = ArrayXd::Zero(n);
  out.k_minus = ArrayXd::Zero(n);
  double kp = 0.0, km = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double dk = k(t) - (t == 0 ? 0.0 : k(t - 1));
    kp += std::max(dk, 0.0);
    km += std::max(-dk, 0.0);
    out.k_plus(t) = kp;
    out.k_minus(t) = km;
  }
  return out;
}

// One-sided cumulative corrections; both are nondecreasing and start from
// the amount needed to pull the initial point inside.
ArrayXd lower_correction(const ArrayXd& w, const ArrayXd& l) {
  ArrayXd k = ArrayXd::Zero(w.size());
  double run = 0.0;
  for (Eigen::Index t = 0; t < w.size(); ++t) {
    run = std::max(run, l(t) - w(t));
    k(t) = std::max(run, 0.0);
  }
  return k;
}

ArrayXd upper_correction(const ArrayXd& w, const ArrayXd& u) {
  ArrayXd k = ArrayXd::Zero(w.size());
  double run = 0.0;
  for (Eigen::Index t = 0; t < w.size(); ++t) {
    run = std::max(run, w(t) - u(t));
    k(t) = std::max(run, 0.0);
  }
  return k;
}

}  // namespace

ReflectedOutput two_sided_map(const ArrayXd& x, const BarrierPair& b) {
  check_instance(x, b);
  const auto n = x.size();
  ArrayXd k = ArrayXd::Zero(n);
  // g = x - l, h = x - u. The nested formula collapses to
  //   P_t = min(P_{t-1}, g_t),          P_0 = min((h_0)^+, g_0)
  //   Q_t = min(g_t, max(Q_{t-1}, h_t)), Q_0 = min(h_0, g_0)
  //   k_t = -max(P_t, Q_t).
  double g = x(0) - b.lower(0);
  double h = x(0) - b.upper(0);
  double P = std::min(std::max(h, 0.0), g);
  double Q = std::min(h, g);
  k(0) = -std::max(P, Q);
  for (Eigen::Index t = 1; t < n; ++t) {
    g = x(t) - b.lower(t);
    h = x(t) - b.upper(t);
    P = std::min(P, g);
    Q = std::min(g, std::max(Q, h));
    k(t) = -std::max(P, Q);
  }
  return from_net(x, k);
}

ReflectedOutput two_sided_map_direct(const ArrayXd& x, const BarrierPair& b) {
  check_instance(x, b);
  const auto n = x.size();
  const ArrayXd g = x - b.lower;
  const ArrayXd h = x - b.upper;
  ArrayXd k = ArrayXd::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double gmin = g.head(t + 1).minCoeff();
    double first = std::min(std::max(h(0), 0.0), gmin);
    double second = -std::numeric_limits<double>::infinity();
    double inner = std::numeric_limits<double>::infinity();  // min of g over [s, t]
    for (Eigen::Index s = t; s >= 0; --s) {
      inner = std::min(inner, g(s));
      second = std::max(second, std::min(h(s), inner));
    }
    k(t) = -std::max(first, second);
  }
  return from_net(x, k);
}

ReflectedOutput iterative_oracle(const ArrayXd& x, const BarrierPair& b, double tol,
                                 int cap) {
  check_instance(x, b);
  const auto n = x.size();
  ArrayXd kp = ArrayXd::Zero(n), km = ArrayXd::Zero(n);
  ArrayXd y = x;
  for (int it = 0; it < cap; ++it) {
    kp = lower_correction(x - km, b.lower);
    km = upper_correction(x + kp, b.upper);
    ArrayXd y_next = x + kp - km;
    const double move = (y_next - y).abs().maxCoeff();
    y.swap(y_next);
    if (move < tol) {
      ReflectedOutput out;
      out.y = y;
      out.k_plus = kp;
      out.k_minus = km;
      out.k = kp - km;
      return out;
    }
  }
  throw numerical_error(
      "iterative_oracle: no fixed point after " + std::to_string(cap) +
      " sweeps (barrier separation too small?)");
}

std::pair<double, double> stability_gap(const ArrayXd& x1, const ArrayXd& x2,
                                        const BarrierPair& b1, const BarrierPair& b2) {
  check_instance(x1, b1);
  check_instance(x2, b2);
  if (x1.size() != x2.size())
    throw precondition_error("stability_gap: instances have different lengths");
  const ArrayXd k1 = two_sided_map(x1, b1).k;
  const ArrayXd k2 = two_sided_map(x2, b2).k;
  const double lhs = (k1 - k2).abs().maxCoeff();
  const double rhs = (x1 - x2).abs().maxCoeff() +
                     (b1.lower - b2.lower)
                         .abs()
                         .max((b1.upper - b2.upper).abs())
                         .maxCoeff();
  return {lhs, rhs};
}

AdaptedProcess k_from_solution(const ScenarioTree& tree, const SubFiltration& filt,
                               const AdaptedProcess& y, const AdaptedProcess& z,
                               const AdaptedProcess& driver_values,
                               const ArrayXd& terminal, const AdaptedProcess& lower,
                               const AdaptedProcess& upper, double dyn_tol) {
  const int N = tree.num_steps();
  const double dt = tree.dt();

  // (y, z) must satisfy the dynamics up to a bounded-variation term whose
  // step increments are constant across branches and across each atom.
  AdaptedProcess dk;  // net increments, G-indexed per step level
  dk.tag = Filt::G;
  dk.levels.resize(N);
  for (int k = 0; k < N; ++k) {
    ArrayXd node_dk = ArrayXd::Zero(tree.node_count(k));
    const TreeLevel& next = tree.level(k + 1);
    for (int i = 0; i < tree.node_count(k); ++i) {
      auto [cb, ce] = tree.children(k, i);
      double first = 0.0;
      for (int c = cb; c < ce; ++c) {
        const double r = y.levels[k](i) - y.levels[k + 1](c) -
                         driver_values.levels[k](i) * dt +
                         z.levels[k](i) * next.branch_db(c);
        if (c == cb)
          first = r;
        else if (std::abs(r - first) > dyn_tol)
          throw precondition_error(
              "k_from_solution: not a solution (branch residual " +
              std::to_string(std::abs(r - first)) + " at level " + std::to_string(k) +
              ")");
      }
      node_dk(i) = -first;
    }
    if (atom_constancy_gap(filt, k, node_dk) > dyn_tol)
      throw precondition_error(
          "k_from_solution: not a solution (regulator increment varies inside an "
          "atom at level " + std::to_string(k) + ")");
    dk.levels[k] = cond_expect_G(tree, filt, k, node_dk);
  }

  // Conditional ingredients of the representation formula.
  std::vector<ArrayXd> xbar(N + 1), lbar(N + 1), ubar(N + 1);
  ArrayXd cum = ArrayXd::Zero(1);  // running \int f ds - \int z dB along paths
  for (int k = 0; k <= N; ++k) {
    xbar[k] = cond_expect_G(tree, filt, k, cum);
    lbar[k] = cond_expect_G(tree, filt, k, lower.levels[k]);
    ubar[k] = cond_expect_G(tree, filt, k, upper.levels[k]);
    if (k == N) break;
    const TreeLevel& next = tree.level(k + 1);
    ArrayXd cum_next = ArrayXd::Zero(tree.node_count(k + 1));
    for (int c = 0; c < tree.node_count(k + 1); ++c) {
      const int pnode = next.parent[c];
      cum_next(c) = cum(pnode) + driver_values.levels[k](pnode) * dt -
                    z.levels[k](pnode) * next.branch_db(c);
    }
    cum.swap(cum_next);
  }
  const ArrayXd abar = cond_expect_G(tree, filt, N, terminal);

  // Reversed-time reflection per terminal-atom trajectory; atoms at level k
  // inherit the regulator value from any of their descendants.
  AdaptedProcess K;
  K.tag = Filt::G;
  K.levels.resize(N + 1);
  for (int k = 0; k <= N; ++k) K.levels[k] = ArrayXd::Zero(filt.atom_count(k));
  for (int g = 0; g < filt.atom_count(N); ++g) {
    std::vector<int> chain(N + 1);
    chain[N] = g;
    for (int k = N; k > 0; --k) chain[k - 1] = filt.atom_parent(k, chain[k]);
    ArrayXd xt(N + 1);
    BarrierPair bt;
    bt.lower = ArrayXd(N + 1);
    bt.upper = ArrayXd(N + 1);
    const double a = abar(g);
    const double xT = xbar[N](g);
    for (int j = 0; j <= N; ++j) {
      const int k = N - j;
      xt(j) = a + xT - xbar[k](chain[k]);
      bt.lower(j) = lbar[k](chain[k]);
      bt.upper(j) = ubar[k](chain[k]);
    }
    const ArrayXd kt = two_sided_map(xt, bt).k;  // kt(j) = K_N - K_{N-j}
    for (int k = 0; k <= N; ++k) K.levels[k](chain[k]) = kt(N) - kt(N - k);
  }
  return K;
}

}  // namespace crbsde
