#include "crbsde/dynkin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace crbsde {

namespace {

void check_g_shape(const SubFiltration& filt, const AdaptedProcess& p,
                   const char* what) {
  if (p.num_levels() != filt.num_levels())
    throw precondition_error(std::string(what) + ": wrong number of levels");
  for (int k = 0; k < p.num_levels(); ++k)
    if (p.levels[k].size() != filt.atom_count(k))
      throw precondition_error(std::string(what) + ": level " + std::to_string(k) +
                               " does not match the atom count");
}

}  // namespace

void validate_rewards(const SubFiltration& filt, const RewardPair& rw) {
  check_g_shape(filt, rw.lower, "rewards");
  check_g_shape(filt, rw.upper, "rewards");
  const int N = filt.last_level();
  if (rw.lower.levels[N].abs().maxCoeff() != 0.0 ||
      rw.upper.levels[N].abs().maxCoeff() != 0.0)
    throw precondition_error("rewards: terminal values must be exactly zero");
}

AdaptedProcess snell_envelope(const ScenarioTree& tree, const SubFiltration& filt,
                              const AdaptedProcess& phi) {
  (void)tree;
  check_g_shape(filt, phi, "snell_envelope");
  const int N = filt.last_level();
  AdaptedProcess r;
  r.tag = Filt::G;
  r.levels.resize(N + 1);
  r.levels[N] = phi.levels[N];
  for (int k = N - 1; k >= 0; --k)
    r.levels[k] = phi.levels[k].max(cond_expect_atom(filt, k + 1, r.levels[k + 1]));
  return r;
}

SnellPair coupled_families(const ScenarioTree& tree, const SubFiltration& filt,
                           const RewardPair& rw, double tol, int sweep_cap_per_step) {
  validate_rewards(filt, rw);
  const int N = filt.last_level();
  SnellPair pair;
  pair.up.tag = pair.down.tag = Filt::G;
  pair.up.levels.resize(N + 1);
  pair.down.levels.resize(N + 1);
  for (int k = 0; k <= N; ++k) {
    pair.up.levels[k] = ArrayXd::Zero(filt.atom_count(k));
    pair.down.levels[k] = ArrayXd::Zero(filt.atom_count(k));
  }
  const int cap = std::max(sweep_cap_per_step * (N + 1), 32);
  for (int m = 0; m < cap; ++m) {
    AdaptedProcess up_arg = pair.down, down_arg = pair.up;
    for (int k = 0; k <= N; ++k) {
      up_arg.levels[k] += rw.lower.levels[k];
      down_arg.levels[k] -= rw.upper.levels[k];
    }
    AdaptedProcess up_next = snell_envelope(tree, filt, up_arg);
    AdaptedProcess down_next = snell_envelope(tree, filt, down_arg);
    double change = 0.0;
    for (int k = 0; k <= N; ++k) {
      change = std::max(change,
                        (up_next.levels[k] - pair.up.levels[k]).abs().maxCoeff());
      change = std::max(change,
                        (down_next.levels[k] - pair.down.levels[k]).abs().maxCoeff());
    }
    pair.up = std::move(up_next);
    pair.down = std::move(down_next);
    pair.sweeps = m + 1;
    if (change < tol) return pair;
  }
  throw cap_error(
      "coupled_families: no fixed point after " + std::to_string(cap) +
      " sweeps; no integrable dominating pair exists for these rewards");
}

namespace {

ArrayXd game_step(const ArrayXd& xi, const ArrayXd& zeta, const ArrayXd& cont,
                  GameTie tie) {
  if (tie == GameTie::lower) return xi.max(zeta.min(cont));
  return zeta.min(xi.max(cont));
}

}  // namespace

ValueProfile game_value_recursive(const ScenarioTree& tree, const SubFiltration& filt,
                                  const RewardPair& rw, GameTie tie) {
  validate_rewards(filt, rw);
  const int N = filt.last_level();
  AdaptedProcess v;
  v.tag = Filt::G;
  v.levels.resize(N + 1);
  v.levels[N] = rw.lower.levels[N];
  for (int k = N - 1; k >= 0; --k)
    v.levels[k] = game_step(rw.lower.levels[k], rw.upper.levels[k],
                            cond_expect_atom(filt, k + 1, v.levels[k + 1]), tie);

  bool sandwiched = true;
  for (int k = 0; k <= N && sandwiched; ++k)
    sandwiched = (rw.lower.levels[k] <= rw.upper.levels[k]).all();
  if (sandwiched) {
    const SnellPair pair = coupled_families(tree, filt, rw);
    for (int k = 0; k <= N; ++k) {
      const double gap =
          (pair.up.levels[k] - pair.down.levels[k] - v.levels[k]).abs().maxCoeff();
      if (gap > 1e-10)
        throw numerical_error(
            "game_value_recursive: coupled-pair difference disagrees with the "
            "recursion by " + std::to_string(gap));
    }
  }

  ValueProfile out;
  out.lower_value = v;
  out.upper_value = v;
  out.value = std::move(v);
  out.gap = 0.0;
  return out;
}

ValueProfile game_value_bruteforce(const ScenarioTree& tree, const SubFiltration& filt,
                                   const RewardPair& rw, GameTie tie,
                                   std::int64_t cap) {
  validate_rewards(filt, rw);
  const int N = filt.last_level();
  ValueProfile out;
  out.lower_value.tag = out.upper_value.tag = out.value.tag = Filt::G;
  out.lower_value.levels.resize(N + 1);
  out.upper_value.levels.resize(N + 1);
  out.value.levels.resize(N + 1);
  out.gap = 0.0;

  for (int from = 0; from <= N; ++from) {
    const auto taus = enumerate_stopping_times(tree, filt, from, cap);
    const int atoms = filt.atom_count(from);
    // Conditional payoff per atom for every (tau, sigma).
    const int n = static_cast<int>(taus.size());
    std::vector<std::vector<ArrayXd>> payoff(n, std::vector<ArrayXd>(n));
    for (int a = 0; a < n; ++a)
      for (int s = 0; s < n; ++s) {
        ArrayXd leafval = ArrayXd::Zero(tree.leaf_count());
        for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
          const int ta = taus[a].level_of_leaf[leaf];
          const int ts = taus[s].level_of_leaf[leaf];
          const bool maximizer_collects =
              tie == GameTie::lower ? (ta <= ts) : (ta < ts);
          if (maximizer_collects)
            leafval(leaf) =
                rw.lower.levels[ta](filt.atom_of(ta, tree.ancestor(leaf, ta)));
          else
            leafval(leaf) =
                rw.upper.levels[ts](filt.atom_of(ts, tree.ancestor(leaf, ts)));
        }
        payoff[a][s] = cond_expect_terminal(tree, filt, from, leafval);
      }
    ArrayXd lower(atoms), upper(atoms);
    for (int atom = 0; atom < atoms; ++atom) {
      double best_lower = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < n; ++a) {
        double worst = std::numeric_limits<double>::infinity();
        for (int s = 0; s < n; ++s) worst = std::min(worst, payoff[a][s](atom));
        best_lower = std::max(best_lower, worst);
      }
      double best_upper = std::numeric_limits<double>::infinity();
      for (int s = 0; s < n; ++s) {
        double worst = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < n; ++a) worst = std::max(worst, payoff[a][s](atom));
        best_upper = std::min(best_upper, worst);
      }
      lower(atom) = best_lower;
      upper(atom) = best_upper;
    }
    out.gap = std::max(out.gap, (upper - lower).abs().maxCoeff());
    out.value.levels[from] = 0.5 * (lower + upper);
    out.lower_value.levels[from] = std::move(lower);
    out.upper_value.levels[from] = std::move(upper);
  }
  return out;
}

ShiftedRewards reward_shift(const ScenarioTree& tree, const SubFiltration& filt,
                            const AdaptedProcess& xi, const AdaptedProcess& zeta) {
  check_g_shape(filt, xi, "reward_shift");
  check_g_shape(filt, zeta, "reward_shift");
  const int N = filt.last_level();
  if ((xi.levels[N] - zeta.levels[N]).abs().maxCoeff() != 0.0)
    throw precondition_error("reward_shift: unequal terminal values");
  ShiftedRewards out;
  out.shift.tag = Filt::G;
  out.shift.levels.resize(N + 1);
  const ArrayXd terminal_leaf = lift_to_nodes(filt, N, xi.levels[N]);
  // At the last level the conditional expectation is the value itself;
  // taking it bitwise keeps the shifted terminal exactly zero.
  out.shift.levels[N] = xi.levels[N];
  for (int k = 0; k < N; ++k)
    out.shift.levels[k] = cond_expect_terminal(tree, filt, k, terminal_leaf);
  out.rewards.lower = xi;
  out.rewards.upper = zeta;
  out.rewards.lower.tag = out.rewards.upper.tag = Filt::G;
  for (int k = 0; k <= N; ++k) {
    out.rewards.lower.levels[k] -= out.shift.levels[k];
    out.rewards.upper.levels[k] -= out.shift.levels[k];
  }
  return out;
}

}  // namespace crbsde
