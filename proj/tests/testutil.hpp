#pragma once

#include <memory>
#include <random>

#include "crbsde/filtration.hpp"
#include "crbsde/solver.hpp"
#include "crbsde/tree.hpp"

namespace crbsde::testing {

struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t seed) : eng(seed) {}
  double uniform(double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(eng);
  }
  int uid(int a, int b) { return std::uniform_int_distribution<int>(a, b)(eng); }
  std::uint64_t raw() { return eng(); }
};

inline ScenarioTree random_tree(Rng& rng, int min_steps, int max_steps,
                                bool binary_only = true) {
  const int n = rng.uid(min_steps, max_steps);
  const double horizon = rng.uniform(0.5, 2.0);
  if (!binary_only && rng.uid(0, 2) == 0)
    return ScenarioTree::random_mary(n, horizon, rng.raw());
  if (rng.uid(0, 1) == 0) return ScenarioTree::binary(n, horizon);
  return ScenarioTree::random_binary(n, horizon, rng.raw());
}

inline SubFiltration random_filtration(Rng& rng, const ScenarioTree& tree) {
  switch (rng.uid(0, 3)) {
    case 0: return SubFiltration::full(tree);
    case 1: return SubFiltration::trivial(tree);
    case 2: return SubFiltration::delayed(tree, rng.uid(1, tree.num_steps()));
    default: return SubFiltration::random_coarsening(tree, rng.raw());
  }
}

inline ArrayXd random_values(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  ArrayXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

inline AdaptedProcess random_f_process(Rng& rng, const ScenarioTree& tree,
                                       double lo = -1.0, double hi = 1.0) {
  AdaptedProcess p = make_f_process(tree, tree.num_steps());
  for (auto& lv : p.levels) lv = random_values(rng, static_cast<int>(lv.size()), lo, hi);
  return p;
}

/// Owns everything a DCRBSDEProblem points at.
struct ProblemBundle {
  std::unique_ptr<ScenarioTree> tree;
  std::unique_ptr<SubFiltration> filt;
  ArrayXd terminal;
  AdaptedProcess lower, upper;
  Driver driver;

  DCRBSDEProblem problem() const {
    DCRBSDEProblem p;
    p.tree = tree.get();
    p.filt = filt.get();
    p.terminal = terminal;
    p.lower = lower;
    p.upper = upper;
    p.driver = driver;
    return p;
  }
};

/// Random obstacles with strict separation and a terminal value whose
/// conditional mean sits strictly inside the conditional band.
inline void fill_sandwiched_data(Rng& rng, ProblemBundle& b, double gap_min = 0.3) {
  const ScenarioTree& tree = *b.tree;
  const SubFiltration& filt = *b.filt;
  const int N = tree.num_steps();
  b.lower = make_f_process(tree, N);
  b.upper = make_f_process(tree, N);
  for (int k = 0; k <= N; ++k) {
    const int n = tree.node_count(k);
    b.lower.levels[k] = random_values(rng, n, -1.0, 0.0);
    b.upper.levels[k] =
        b.lower.levels[k] + gap_min + random_values(rng, n, 0.0, 1.0);
  }
  ArrayXd xi = random_values(rng, tree.leaf_count(), -1.5, 1.5);
  const ArrayXd xbar = cond_expect_G(tree, filt, N, xi);
  const ArrayXd lbar = cond_expect_G(tree, filt, N, b.lower.levels[N]);
  const ArrayXd ubar = cond_expect_G(tree, filt, N, b.upper.levels[N]);
  for (int a = 0; a < filt.atom_count(N); ++a) {
    const double target =
        lbar(a) + rng.uniform(0.15, 0.85) * (ubar(a) - lbar(a));
    for (int node : filt.atom_members(N, a)) xi(node) += target - xbar(a);
  }
  b.terminal = xi;
}

inline ProblemBundle random_constant_problem(Rng& rng, int min_steps = 1,
                                             int max_steps = 5) {
  ProblemBundle b;
  b.tree = std::make_unique<ScenarioTree>(random_tree(rng, min_steps, max_steps));
  b.filt = std::make_unique<SubFiltration>(random_filtration(rng, *b.tree));
  fill_sandwiched_data(rng, b);
  AdaptedProcess fv = random_f_process(rng, *b.tree, -1.0, 1.0);
  b.driver = process_driver(std::move(fv));
  return b;
}

/// Nonlinear Lipschitz driver a*sin(y) + c*cos(z) + noise(level, node).
inline ProblemBundle random_lipschitz_problem(Rng& rng, double max_lip,
                                              int min_steps = 2, int max_steps = 6) {
  ProblemBundle b;
  b.tree = std::make_unique<ScenarioTree>(random_tree(rng, min_steps, max_steps));
  b.filt = std::make_unique<SubFiltration>(random_filtration(rng, *b.tree));
  fill_sandwiched_data(rng, b);
  const double ay = rng.uniform(-max_lip / 2, max_lip / 2);
  const double az = rng.uniform(-max_lip / 2, max_lip / 2);
  AdaptedProcess noise = random_f_process(rng, *b.tree, -0.5, 0.5);
  b.driver.f = [ay, az, noise](int level, int node, double y, double z) {
    return ay * std::sin(y) + az * std::cos(z) + noise.levels[level](node);
  };
  b.driver.lipschitz = std::abs(ay) + std::abs(az);
  b.driver.depends_on_yz = true;
  return b;
}

/// Classical nodewise doubly-reflected recursion, the oracle for the
/// full-information reduction (constant drivers).
inline AdaptedProcess classical_doubly_reflected(const DCRBSDEProblem& p) {
  const ScenarioTree& tree = *p.tree;
  const int N = tree.num_steps();
  AdaptedProcess v = make_f_process(tree, N);
  v.levels[N] = p.terminal;
  for (int k = N - 1; k >= 0; --k) {
    ArrayXd cont = cond_expect_F(tree, k + 1, v.levels[k + 1]);
    for (int i = 0; i < tree.node_count(k); ++i)
      cont(i) += p.driver.f(k, i, 0, 0) * tree.dt();
    v.levels[k] = cont.max(p.lower.levels[k]).min(p.upper.levels[k]);
  }
  return v;
}

/// Scalar mean-clipped recursion, the oracle for the deterministic-
/// information reduction; the regulator is a deterministic sequence.
struct MeanReflected {
  std::vector<double> ybar, kplus, kminus;
};
inline MeanReflected mean_reflected(const DCRBSDEProblem& p) {
  const ScenarioTree& tree = *p.tree;
  const int N = tree.num_steps();
  MeanReflected m;
  m.ybar.assign(N + 1, 0.0);
  m.kplus.assign(N + 1, 0.0);
  m.kminus.assign(N + 1, 0.0);
  std::vector<double> dkp(N, 0.0), dkm(N, 0.0);
  m.ybar[N] = expect(tree, N, p.terminal);
  for (int k = N - 1; k >= 0; --k) {
    ArrayXd fv(tree.node_count(k));
    for (int i = 0; i < tree.node_count(k); ++i) fv(i) = p.driver.f(k, i, 0, 0);
    const double cont = m.ybar[k + 1] + expect(tree, k, fv) * tree.dt();
    const double lo = expect(tree, k, p.lower.levels[k]);
    const double hi = expect(tree, k, p.upper.levels[k]);
    m.ybar[k] = std::min(hi, std::max(lo, cont));
    dkp[k] = std::max(lo - cont, 0.0);
    dkm[k] = std::max(cont - hi, 0.0);
  }
  for (int k = 0; k < N; ++k) {
    m.kplus[k + 1] = m.kplus[k] + dkp[k];
    m.kminus[k + 1] = m.kminus[k] + dkm[k];
  }
  return m;
}

/// Realized driver values of a (y,z)-independent problem as an F-process.
inline AdaptedProcess constant_driver_values(const DCRBSDEProblem& p) {
  const ScenarioTree& tree = *p.tree;
  AdaptedProcess fv = make_f_process(tree, tree.num_steps() - 1);
  for (int k = 0; k < tree.num_steps(); ++k)
    for (int i = 0; i < tree.node_count(k); ++i)
      fv.levels[k](i) = p.driver.f(k, i, 0.0, 0.0);
  return fv;
}

/// Cumulative driver integral along paths: C_k(node) = sum_{j<k} f_j dt.
inline AdaptedProcess cumulative_integral(const ScenarioTree& tree,
                                          const AdaptedProcess& fvals) {
  const int N = tree.num_steps();
  AdaptedProcess c = make_f_process(tree, N);
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < tree.node_count(k + 1); ++i) {
      const int p = tree.level(k + 1).parent[i];
      c.levels[k + 1](i) = c.levels[k](p) + fvals.levels[k](p) * tree.dt();
    }
  return c;
}

}  // namespace crbsde::testing
