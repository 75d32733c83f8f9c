#include "crbsde/switching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace crbsde {

void validate_switching(const SwitchingProblem& sp) {
  if (!sp.tree || !sp.filt)
    throw precondition_error("switching: tree or filtration missing");
  const ScenarioTree& tree = *sp.tree;
  const int N = tree.num_steps();
  for (const AdaptedProcess* p :
       {&sp.psi_open, &sp.psi_closed, &sp.stop_cost, &sp.start_cost}) {
    if (p->num_levels() < N + 1)
      throw precondition_error("switching: process missing levels");
    for (int k = 0; k <= N; ++k)
      if (p->levels[k].size() != tree.node_count(k))
        throw precondition_error("switching: level " + std::to_string(k) +
                                 " does not match the tree");
  }
  for (int k = 0; k <= N; ++k) {
    if (sp.stop_cost.levels[k].minCoeff() <= 0.0 ||
        sp.start_cost.levels[k].minCoeff() <= 0.0)
      throw precondition_error(
          "switching: costs must be strictly positive (level " + std::to_string(k) +
          ")");
  }
}

double profit(const SwitchingProblem& sp, const Strategy& strategy) {
  validate_switching(sp);
  const ScenarioTree& tree = *sp.tree;
  const int N = tree.num_steps();
  const double dt = tree.dt();
  const int m = static_cast<int>(strategy.switches.size());
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(strategy.switches[i].level_of_leaf.size()) !=
        tree.leaf_count())
      throw precondition_error("profit: strategy does not match the tree");
    for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
      const int cur = strategy.switches[i].level_of_leaf[leaf];
      if (cur < 0 || cur > N)
        throw precondition_error("profit: switch level out of range");
      if (i > 0 && cur < strategy.switches[i - 1].level_of_leaf[leaf])
        throw precondition_error("profit: non-monotone strategy");
    }
  }

  double total = 0.0;
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    double acc = 0.0;
    int next_switch = 0;
    int fired = 0;
    for (int j = 0; j < N; ++j) {
      while (next_switch < m &&
             strategy.switches[next_switch].level_of_leaf[leaf] <= j) {
        const int at = strategy.switches[next_switch].level_of_leaf[leaf];
        if (at < N) {
          const int node = tree.ancestor(leaf, at);
          acc -= (fired % 2 == 0) ? sp.stop_cost.levels[at](node)
                                  : sp.start_cost.levels[at](node);
        }
        ++next_switch;
        ++fired;
      }
      const int node = tree.ancestor(leaf, j);
      acc += dt * (fired % 2 == 0 ? sp.psi_open.levels[j](node)
                                  : sp.psi_closed.levels[j](node));
    }
    // remaining switches sit exactly at the horizon: free no-ops
    total += tree.level(N).path_prob(leaf) * acc;
  }
  return total;
}

SwitchingDecomposition decompose(const SwitchingProblem& sp) {
  validate_switching(sp);
  const ScenarioTree& tree = *sp.tree;
  const SubFiltration& filt = *sp.filt;
  const int N = tree.num_steps();
  const double dt = tree.dt();

  DCRBSDEProblem p;
  p.tree = sp.tree;
  p.filt = sp.filt;
  p.terminal = ArrayXd::Zero(tree.leaf_count());
  AdaptedProcess diff = make_f_process(tree, N - 1);
  for (int k = 0; k < N; ++k)
    diff.levels[k] = sp.psi_open.levels[k] - sp.psi_closed.levels[k];
  p.driver = process_driver(std::move(diff));
  p.lower = sp.stop_cost;
  for (auto& lv : p.lower.levels) lv = -lv;
  p.upper = sp.start_cost;

  SwitchingDecomposition dec;
  dec.core = solve_constant_driver(p);

  dec.y_open = make_f_process(tree, N);
  dec.y_closed = make_f_process(tree, N);
  for (int k = N - 1; k >= 0; --k) {
    ArrayXd dkp(filt.atom_count(k)), dkm(filt.atom_count(k));
    for (int a = 0; a < filt.atom_count(k); ++a) {
      auto [cb, ce] = filt.atom_children(k, a);
      dkp(a) = dec.core.k_plus.levels[k + 1](cb) - dec.core.k_plus.levels[k](a);
      dkm(a) = dec.core.k_minus.levels[k + 1](cb) - dec.core.k_minus.levels[k](a);
    }
    dec.y_open.levels[k] = cond_expect_F(tree, k + 1, dec.y_open.levels[k + 1]) +
                           sp.psi_open.levels[k] * dt + lift_to_nodes(filt, k, dkp);
    dec.y_closed.levels[k] =
        cond_expect_F(tree, k + 1, dec.y_closed.levels[k + 1]) +
        sp.psi_closed.levels[k] * dt + lift_to_nodes(filt, k, dkm);
  }

  dec.split_error = 0.0;
  for (int k = 0; k <= N; ++k)
    dec.split_error = std::max(
        dec.split_error, (dec.core.y.levels[k] -
                          (dec.y_open.levels[k] - dec.y_closed.levels[k]))
                             .abs()
                             .maxCoeff());

  // One-sided audits: each mode value dominates its obstacle conditionally
  // and its regulator only acts on contact.
  dec.one_sided_slack = std::numeric_limits<double>::infinity();
  std::vector<ArrayXd> slack_open(N + 1), slack_closed(N + 1);
  for (int k = 0; k <= N; ++k) {
    const ArrayXd open_bar = cond_expect_G(tree, filt, k, dec.y_open.levels[k]);
    const ArrayXd closed_bar = cond_expect_G(tree, filt, k, dec.y_closed.levels[k]);
    const ArrayXd stop_bar = cond_expect_G(tree, filt, k, sp.stop_cost.levels[k]);
    const ArrayXd start_bar = cond_expect_G(tree, filt, k, sp.start_cost.levels[k]);
    slack_open[k] = open_bar - (closed_bar - stop_bar);
    slack_closed[k] = closed_bar - (open_bar - start_bar);
    dec.one_sided_slack = std::min(dec.one_sided_slack, slack_open[k].minCoeff());
    dec.one_sided_slack = std::min(dec.one_sided_slack, slack_closed[k].minCoeff());
  }
  dec.one_sided_flatoff = 0.0;
  for (int g = 0; g < filt.atom_count(N); ++g) {
    std::vector<int> chain(N + 1);
    chain[N] = g;
    for (int k = N; k > 0; --k) chain[k - 1] = filt.atom_parent(k, chain[k]);
    double lo = 0.0, hi = 0.0;
    for (int k = 0; k < N; ++k) {
      const double dkp = dec.core.k_plus.levels[k + 1](chain[k + 1]) -
                         dec.core.k_plus.levels[k](chain[k]);
      const double dkm = dec.core.k_minus.levels[k + 1](chain[k + 1]) -
                         dec.core.k_minus.levels[k](chain[k]);
      lo += std::abs(slack_open[k](chain[k]) * dkp);
      hi += std::abs(slack_closed[k](chain[k]) * dkm);
    }
    dec.one_sided_flatoff = std::max(dec.one_sided_flatoff, std::max(lo, hi));
  }
  return dec;
}

Strategy optimal_strategy(const SwitchingProblem& sp,
                          const SwitchingDecomposition& dec, double slack_tol) {
  const ScenarioTree& tree = *sp.tree;
  const SubFiltration& filt = *sp.filt;
  const int N = tree.num_steps();
  std::vector<ArrayXd> slack_lo(N + 1), slack_hi(N + 1);
  for (int k = 0; k <= N; ++k) {
    const ArrayXd ybar = cond_expect_G(tree, filt, k, dec.core.y.levels[k]);
    slack_lo[k] =
        ybar + cond_expect_G(tree, filt, k, sp.stop_cost.levels[k]);
    slack_hi[k] =
        cond_expect_G(tree, filt, k, sp.start_cost.levels[k]) - ybar;
  }
  std::vector<std::vector<int>> fired(tree.leaf_count());
  size_t longest = 0;
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    bool open = true;
    for (int k = 0; k < N; ++k) {
      const int atom = filt.atom_of(k, tree.ancestor(leaf, k));
      const double slack = open ? slack_lo[k](atom) : slack_hi[k](atom);
      if (slack <= slack_tol) {
        fired[leaf].push_back(k);
        open = !open;
      }
    }
    longest = std::max(longest, fired[leaf].size());
  }
  Strategy out;
  out.switches.resize(longest);
  for (size_t i = 0; i < longest; ++i)
    out.switches[i].level_of_leaf.assign(tree.leaf_count(), N);
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf)
    for (size_t i = 0; i < fired[leaf].size(); ++i)
      out.switches[i].level_of_leaf[leaf] = fired[leaf][i];
  return out;
}

namespace {

std::int64_t count_rec(const SubFiltration& filt, int k, int atom, int budget,
                       std::int64_t cap) {
  if (k == filt.last_level()) return 1;
  std::int64_t total = 0;
  for (int i = 0; i <= budget; ++i) {
    std::int64_t prod = 1;
    auto [b, e] = filt.atom_children(k, atom);
    for (int c = b; c < e; ++c) {
      prod *= count_rec(filt, k + 1, c, budget - i, cap);
      if (prod >= cap) return cap;
    }
    total += prod;
    if (total >= cap) return cap;
  }
  return total;
}

// Per-leaf switch levels for every admissible assignment below the atom.
using Assignment = std::vector<std::vector<int>>;  // leaf -> levels

void collect_leaves(const ScenarioTree& tree, const SubFiltration& filt, int k,
                    int atom, std::vector<int>& out) {
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf)
    if (filt.atom_of(k, tree.ancestor(leaf, k)) == atom) out.push_back(leaf);
}

std::vector<Assignment> enum_rec(const ScenarioTree& tree, const SubFiltration& filt,
                                 int k, int atom, int budget) {
  std::vector<int> leaves;
  collect_leaves(tree, filt, k, atom, leaves);
  if (k == filt.last_level()) {
    Assignment a(tree.leaf_count());
    for (int leaf : leaves) a[leaf].assign(budget, k);  // pad at the horizon
    return {a};
  }
  std::vector<Assignment> out;
  auto [b, e] = filt.atom_children(k, atom);
  for (int i = 0; i <= budget; ++i) {
    std::vector<Assignment> combined = {Assignment(tree.leaf_count())};
    for (int c = b; c < e; ++c) {
      const auto sub = enum_rec(tree, filt, k + 1, c, budget - i);
      std::vector<Assignment> next;
      next.reserve(combined.size() * sub.size());
      for (const auto& left : combined)
        for (const auto& right : sub) {
          Assignment merged = left;
          for (int leaf = 0; leaf < tree.leaf_count(); ++leaf)
            if (!right[leaf].empty()) merged[leaf] = right[leaf];
          next.push_back(std::move(merged));
        }
      combined = std::move(next);
    }
    for (auto& a : combined) {
      for (int leaf : leaves) {
        std::vector<int> levels(i, k);
        levels.insert(levels.end(), a[leaf].begin(), a[leaf].end());
        a[leaf] = std::move(levels);
      }
      out.push_back(std::move(a));
    }
  }
  return out;
}

}  // namespace

std::int64_t count_strategies(const SubFiltration& filt, int max_switches,
                              std::int64_t cap) {
  if (max_switches < 0)
    throw precondition_error("count_strategies: negative switch bound");
  if (max_switches == 0) return 1;
  return std::min<std::int64_t>(
      cap, 1 + count_rec(filt, 0, 0, max_switches, cap));
}

std::vector<Strategy> enumerate_strategies(const ScenarioTree& tree,
                                           const SubFiltration& filt,
                                           int max_switches, std::int64_t cap) {
  const std::int64_t count = count_strategies(filt, max_switches, cap);
  if (count >= cap)
    throw cap_error("enumerate_strategies: family exceeds the count bound " +
                    std::to_string(cap));
  std::vector<Strategy> out;
  out.push_back(Strategy{});  // never switch
  if (max_switches == 0) return out;
  for (const Assignment& a : enum_rec(tree, filt, 0, 0, max_switches)) {
    Strategy s;
    s.switches.resize(max_switches);
    for (int i = 0; i < max_switches; ++i)
      s.switches[i].level_of_leaf.assign(tree.leaf_count(), tree.num_steps());
    for (int leaf = 0; leaf < tree.leaf_count(); ++leaf)
      for (int i = 0; i < max_switches; ++i)
        s.switches[i].level_of_leaf[leaf] = a[leaf][i];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace crbsde
