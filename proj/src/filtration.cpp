#include "crbsde/filtration.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <string>

namespace crbsde {

SubFiltration::SubFiltration(const ScenarioTree& tree,
                             std::vector<std::vector<int>> atom_of) {
  const int N = tree.num_steps();
  if (static_cast<int>(atom_of.size()) != N + 1)
    throw precondition_error("subfiltration: need one atom map per level");
  atom_of_.resize(N + 1);
  members_.resize(N + 1);
  probs_.resize(N + 1);
  parent_.resize(N + 1);
  child_begin_.resize(N + 1);

  for (int k = 0; k <= N; ++k) {
    const int n = tree.node_count(k);
    if (static_cast<int>(atom_of[k].size()) != n)
      throw precondition_error("subfiltration: atom map at level " +
                               std::to_string(k) + " does not match level width");
    // Canonical renumbering in order of first appearance, grouped so that
    // children of one parent atom get contiguous labels.
    std::map<int, int> relabel;
    std::vector<int> order;  // original labels by (parent atom, first node)
    if (k == 0) {
      for (int i = 0; i < n; ++i)
        if (!relabel.count(atom_of[k][i])) {
          relabel[atom_of[k][i]] = static_cast<int>(order.size());
          order.push_back(atom_of[k][i]);
        }
    } else {
      std::map<std::pair<int, int>, int> first_seen;  // (parent atom, label) -> node
      std::vector<std::pair<std::pair<int, int>, int>> keys;
      for (int i = 0; i < n; ++i) {
        const int pa = atom_of_[k - 1][tree.level(k).parent[i]];
        auto key = std::make_pair(pa, atom_of[k][i]);
        if (!first_seen.count(key)) {
          first_seen[key] = i;
          keys.push_back({key, i});
        }
      }
      std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
        if (a.first.first != b.first.first) return a.first.first < b.first.first;
        return a.second < b.second;
      });
      // A label reused across two parent atoms would merge information; that
      // violates the nondecreasing property and is rejected below.
      std::map<int, int> label_parent;
      for (const auto& [key, node] : keys) {
        auto [pa, label] = key;
        auto it = label_parent.find(label);
        if (it != label_parent.end() && it->second != pa)
          throw precondition_error(
              "subfiltration: level " + std::to_string(k) + " atom spans two level-" +
              std::to_string(k - 1) + " atoms (partition merges)");
        label_parent[label] = pa;
        relabel[label] = static_cast<int>(order.size());
        order.push_back(label);
      }
    }
    atom_of_[k].resize(n);
    members_[k].assign(order.size(), {});
    for (int i = 0; i < n; ++i) {
      const int a = relabel.at(atom_of[k][i]);
      atom_of_[k][i] = a;
      members_[k][a].push_back(i);
    }
    probs_[k].assign(order.size(), 0.0);
    for (int a = 0; a < static_cast<int>(order.size()); ++a) {
      for (int node : members_[k][a]) probs_[k][a] += tree.level(k).path_prob(node);
      if (members_[k][a].empty())
        throw precondition_error("subfiltration: empty atom at level " +
                                 std::to_string(k));
    }
    // Atom-tree links; refinement is rechecked nodewise for safety.
    parent_[k].assign(order.size(), -1);
    if (k > 0) {
      for (int i = 0; i < n; ++i) {
        const int a = atom_of_[k][i];
        const int pa = atom_of_[k - 1][tree.level(k).parent[i]];
        if (parent_[k][a] == -1)
          parent_[k][a] = pa;
        else if (parent_[k][a] != pa)
          throw precondition_error(
              "subfiltration: level " + std::to_string(k) +
              " atom spans two parent atoms (partition merges)");
      }
      child_begin_[k - 1].assign(atom_count(k - 1) + 1, 0);
      for (int a = 0; a < atom_count(k); ++a) child_begin_[k - 1][parent_[k][a] + 1]++;
      for (int a = 0; a < atom_count(k - 1); ++a)
        child_begin_[k - 1][a + 1] += child_begin_[k - 1][a];
      for (int a = 1; a < atom_count(k); ++a)
        if (parent_[k][a] < parent_[k][a - 1])
          throw precondition_error("subfiltration: internal atom ordering failure");
    }
  }
  child_begin_[N].assign(atom_count(N) + 1, 0);
}

SubFiltration SubFiltration::full(const ScenarioTree& tree) {
  std::vector<std::vector<int>> atoms(tree.num_steps() + 1);
  for (int k = 0; k <= tree.num_steps(); ++k) {
    atoms[k].resize(tree.node_count(k));
    std::iota(atoms[k].begin(), atoms[k].end(), 0);
  }
  return SubFiltration(tree, std::move(atoms));
}

SubFiltration SubFiltration::trivial(const ScenarioTree& tree) {
  std::vector<std::vector<int>> atoms(tree.num_steps() + 1);
  for (int k = 0; k <= tree.num_steps(); ++k) atoms[k].assign(tree.node_count(k), 0);
  return SubFiltration(tree, std::move(atoms));
}

SubFiltration SubFiltration::delayed(const ScenarioTree& tree, int delay) {
  if (delay < 0) throw precondition_error("subfiltration: delay must be nonnegative");
  std::vector<std::vector<int>> atoms(tree.num_steps() + 1);
  for (int k = 0; k <= tree.num_steps(); ++k) {
    const int src = std::max(k - delay, 0);
    atoms[k].resize(tree.node_count(k));
    for (int i = 0; i < tree.node_count(k); ++i) atoms[k][i] = tree.ancestor_of(k, i, src);
  }
  return SubFiltration(tree, std::move(atoms));
}

SubFiltration SubFiltration::random_coarsening(const ScenarioTree& tree,
                                               std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  const int N = tree.num_steps();
  std::vector<std::vector<int>> atoms(N + 1);
  atoms[0].assign(1, 0);
  int next_label = 1;
  for (int k = 1; k <= N; ++k) {
    atoms[k].assign(tree.node_count(k), -1);
    // Partition each parent atom's child nodes at random.
    std::map<int, std::vector<int>> group;  // parent atom -> child nodes
    for (int i = 0; i < tree.node_count(k); ++i)
      group[atoms[k - 1][tree.level(k).parent[i]]].push_back(i);
    for (auto& [pa, nodes] : group) {
      const int cells = std::uniform_int_distribution<int>(
          1, static_cast<int>(nodes.size()))(eng);
      std::vector<int> labels(cells);
      for (int c = 0; c < cells; ++c) labels[c] = next_label++;
      // Every cell gets one node, the rest are assigned uniformly.
      for (int c = 0; c < cells; ++c) atoms[k][nodes[c]] = labels[c];
      for (size_t j = cells; j < nodes.size(); ++j)
        atoms[k][nodes[j]] =
            labels[std::uniform_int_distribution<int>(0, cells - 1)(eng)];
    }
  }
  return SubFiltration(tree, std::move(atoms));
}

bool SubFiltration::is_full() const {
  for (int k = 0; k < num_levels(); ++k)
    for (int a = 0; a < atom_count(k); ++a)
      if (members_[k][a].size() != 1) return false;
  return true;
}

bool SubFiltration::is_trivial() const {
  for (int k = 0; k < num_levels(); ++k)
    if (atom_count(k) != 1) return false;
  return true;
}

ArrayXd cond_expect_G(const ScenarioTree& tree, const SubFiltration& filt, int level,
                      const ArrayXd& node_values) {
  if (level < 0 || level > tree.num_steps())
    throw error("cond_expect_G: level out of range");
  if (node_values.size() != tree.node_count(level))
    throw error("cond_expect_G: value array does not match level width");
  ArrayXd out = ArrayXd::Zero(filt.atom_count(level));
  for (int a = 0; a < out.size(); ++a) {
    double acc = 0.0;
    for (int node : filt.atom_members(level, a))
      acc += tree.level(level).path_prob(node) * node_values(node);
    out(a) = acc / filt.atom_prob(level, a);
  }
  return out;
}

ArrayXd lift_to_nodes(const SubFiltration& filt, int level, const ArrayXd& atom_values) {
  if (atom_values.size() != filt.atom_count(level))
    throw error("lift_to_nodes: atom array does not match level");
  int n = 0;
  for (int a = 0; a < filt.atom_count(level); ++a)
    n += static_cast<int>(filt.atom_members(level, a).size());
  ArrayXd out = ArrayXd::Zero(n);
  for (int a = 0; a < filt.atom_count(level); ++a)
    for (int node : filt.atom_members(level, a)) out(node) = atom_values(a);
  return out;
}

ArrayXd cond_expect_atom(const SubFiltration& filt, int level_of_x,
                         const ArrayXd& atom_values) {
  if (level_of_x < 1 || level_of_x > filt.last_level())
    throw error("cond_expect_atom: level out of range");
  if (atom_values.size() != filt.atom_count(level_of_x))
    throw error("cond_expect_atom: atom array does not match level");
  const int k = level_of_x - 1;
  ArrayXd out = ArrayXd::Zero(filt.atom_count(k));
  for (int a = 0; a < out.size(); ++a) {
    auto [b, e] = filt.atom_children(k, a);
    double acc = 0.0;
    for (int c = b; c < e; ++c)
      acc += filt.atom_prob(level_of_x, c) * atom_values(c);
    out(a) = acc / filt.atom_prob(k, a);
  }
  return out;
}

ArrayXd cond_expect_terminal(const ScenarioTree& tree, const SubFiltration& filt,
                             int level, const ArrayXd& leaf_values) {
  const int N = tree.num_steps();
  if (leaf_values.size() != tree.leaf_count())
    throw error("cond_expect_terminal: leaf array does not match leaf count");
  ArrayXd cur = cond_expect_G(tree, filt, N, leaf_values);
  for (int k = N; k > level; --k) cur = cond_expect_atom(filt, k, cur);
  return cur;
}

double atom_constancy_gap(const SubFiltration& filt, int level,
                          const ArrayXd& node_values) {
  double gap = 0.0;
  for (int a = 0; a < filt.atom_count(level); ++a) {
    const auto& mem = filt.atom_members(level, a);
    for (int node : mem)
      gap = std::max(gap, std::abs(node_values(node) - node_values(mem.front())));
  }
  return gap;
}

AdaptedProcess project_to_atoms(const ScenarioTree& tree, const SubFiltration& filt,
                                const AdaptedProcess& f_proc) {
  AdaptedProcess g;
  g.tag = Filt::G;
  g.levels.resize(f_proc.levels.size());
  for (int k = 0; k < f_proc.num_levels(); ++k)
    g.levels[k] = cond_expect_G(tree, filt, k, f_proc.levels[k]);
  return g;
}

AdaptedProcess lift_process(const SubFiltration& filt, const AdaptedProcess& g_proc) {
  AdaptedProcess f;
  f.tag = Filt::F;
  f.levels.resize(g_proc.levels.size());
  for (int k = 0; k < g_proc.num_levels(); ++k)
    f.levels[k] = lift_to_nodes(filt, k, g_proc.levels[k]);
  return f;
}

bool is_g_stopping_time(const ScenarioTree& tree, const SubFiltration& filt,
                        const StoppingTime& tau) {
  const int N = tree.num_steps();
  if (static_cast<int>(tau.level_of_leaf.size()) != tree.leaf_count()) return false;
  for (int v : tau.level_of_leaf)
    if (v < 0 || v > N) return false;
  for (int k = 0; k <= N; ++k) {
    std::vector<int> verdict(filt.atom_count(k), -1);  // -1 unseen, else 0/1
    for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
      const int a = filt.atom_of(k, tree.ancestor(leaf, k));
      const int stopped = tau.level_of_leaf[leaf] <= k ? 1 : 0;
      if (verdict[a] == -1)
        verdict[a] = stopped;
      else if (verdict[a] != stopped)
        return false;
    }
  }
  return true;
}

namespace {

std::int64_t count_rec(const SubFiltration& filt, int k, int atom, std::int64_t cap) {
  if (k == filt.last_level()) return 1;
  std::int64_t prod = 1;
  auto [b, e] = filt.atom_children(k, atom);
  for (int c = b; c < e; ++c) {
    prod *= count_rec(filt, k + 1, c, cap);
    if (prod >= cap) return cap;
  }
  return std::min<std::int64_t>(cap, 1 + prod);
}

// Appends the stop level of every leaf below (k, atom) for each stopping
// rule of the subtree, in a stable order.
void enumerate_rec(const ScenarioTree& tree, const SubFiltration& filt, int k,
                   int atom, std::vector<std::vector<std::pair<int, int>>>& out) {
  const int N = tree.num_steps();
  std::vector<std::pair<int, int>> stop_here;  // (leaf, level)
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf)
    if (filt.atom_of(k, tree.ancestor(leaf, k)) == atom) stop_here.push_back({leaf, k});
  if (k == N) {
    out.push_back(std::move(stop_here));
    return;
  }
  out.push_back(stop_here);
  // Defer: combine every choice of the children independently.
  std::vector<std::vector<std::pair<int, int>>> combined = {{}};
  auto [b, e] = filt.atom_children(k, atom);
  for (int c = b; c < e; ++c) {
    std::vector<std::vector<std::pair<int, int>>> sub;
    enumerate_rec(tree, filt, k + 1, c, sub);
    std::vector<std::vector<std::pair<int, int>>> next;
    next.reserve(combined.size() * sub.size());
    for (const auto& left : combined)
      for (const auto& right : sub) {
        auto merged = left;
        merged.insert(merged.end(), right.begin(), right.end());
        next.push_back(std::move(merged));
      }
    combined = std::move(next);
  }
  for (auto& c : combined) out.push_back(std::move(c));
}

}  // namespace

std::int64_t count_stopping_times(const SubFiltration& filt, int from_level,
                                  std::int64_t cap) {
  if (from_level < 0 || from_level > filt.last_level())
    throw error("count_stopping_times: level out of range");
  std::int64_t total = 1;
  for (int a = 0; a < filt.atom_count(from_level); ++a) {
    total *= count_rec(filt, from_level, a, cap);
    if (total >= cap) return cap;
  }
  return total;
}

std::vector<StoppingTime> enumerate_stopping_times(const ScenarioTree& tree,
                                                   const SubFiltration& filt,
                                                   int from_level, std::int64_t cap) {
  const std::int64_t count = count_stopping_times(filt, from_level, cap);
  if (count >= cap)
    throw cap_error("enumerate_stopping_times: family exceeds the count bound " +
                    std::to_string(cap));
  // Per top-level atom, list the subtree's rules, then take the product.
  std::vector<std::vector<std::vector<std::pair<int, int>>>> per_atom;
  for (int a = 0; a < filt.atom_count(from_level); ++a) {
    std::vector<std::vector<std::pair<int, int>>> sub;
    enumerate_rec(tree, filt, from_level, a, sub);
    per_atom.push_back(std::move(sub));
  }
  std::vector<StoppingTime> result;
  std::vector<size_t> pick(per_atom.size(), 0);
  while (true) {
    StoppingTime tau;
    tau.level_of_leaf.assign(tree.leaf_count(), -1);
    for (size_t a = 0; a < per_atom.size(); ++a)
      for (const auto& [leaf, lvl] : per_atom[a][pick[a]])
        tau.level_of_leaf[leaf] = lvl;
    result.push_back(std::move(tau));
    size_t i = 0;
    while (i < pick.size() && ++pick[i] == per_atom[i].size()) pick[i++] = 0;
    if (i == pick.size()) break;
  }
  return result;
}

ArrayXd sample_at(const ScenarioTree& tree, const SubFiltration& filt,
                  const AdaptedProcess& g_proc, const StoppingTime& tau) {
  ArrayXd out = ArrayXd::Zero(tree.leaf_count());
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    const int k = tau.level_of_leaf[leaf];
    out(leaf) = g_proc.levels[k](filt.atom_of(k, tree.ancestor(leaf, k)));
  }
  return out;
}

}  // namespace crbsde
