#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "crbsde/tree.hpp"

namespace crbsde {

/// Per-level coarsening of the node partition, realizing a subfiltration
/// of the tree's own information flow. Validation enforces that atoms are
/// nonempty unions of nodes and that the induced partition of the sample
/// space only refines over time (never merges), so the atoms themselves
/// form a tree: every atom at level k+1 has a unique parent atom.
class SubFiltration {
 public:
  /// `atom_of[k][node]` assigns each level-k node an atom label; labels
  /// are renumbered canonically (children of one parent atom contiguous).
  SubFiltration(const ScenarioTree& tree, std::vector<std::vector<int>> atom_of);

  static SubFiltration full(const ScenarioTree& tree);
  static SubFiltration trivial(const ScenarioTree& tree);
  /// Information delayed by d steps: the level-k partition is the one the
  /// node partition had at level max(k - d, 0).
  static SubFiltration delayed(const ScenarioTree& tree, int delay);
  /// Random valid coarsening (each parent atom's children are partitioned
  /// at random), useful for property tests.
  static SubFiltration random_coarsening(const ScenarioTree& tree,
                                         std::uint64_t seed);

  int num_levels() const { return static_cast<int>(atom_of_.size()); }
  int last_level() const { return num_levels() - 1; }
  int atom_count(int k) const { return static_cast<int>(members_[k].size()); }
  int atom_of(int k, int node) const { return atom_of_[k][node]; }
  const std::vector<int>& atom_members(int k, int atom) const {
    return members_[k][atom];
  }
  double atom_prob(int k, int atom) const { return probs_[k][atom]; }
  /// Parent atom at level k-1 of an atom at level k.
  int atom_parent(int k, int atom) const { return parent_[k][atom]; }
  /// Child atoms at level k+1 of an atom at level k, as an index range.
  std::pair<int, int> atom_children(int k, int atom) const {
    return {child_begin_[k][atom], child_begin_[k][atom + 1]};
  }
  bool is_full() const;
  bool is_trivial() const;

 private:
  std::vector<std::vector<int>> atom_of_;              // level -> node -> atom
  std::vector<std::vector<std::vector<int>>> members_; // level -> atom -> nodes
  std::vector<std::vector<double>> probs_;             // level -> atom -> P(atom)
  std::vector<std::vector<int>> parent_;               // level -> atom -> parent atom
  std::vector<std::vector<int>> child_begin_;          // level -> atom -> range
};

/// Conditional expectation of level-k node values given the level-k atoms.
ArrayXd cond_expect_G(const ScenarioTree& tree, const SubFiltration& filt,
                      int level, const ArrayXd& node_values);

/// Spread atom values back over the nodes of a level.
ArrayXd lift_to_nodes(const SubFiltration& filt, int level,
                      const ArrayXd& atom_values);

/// One-step conditional expectation on the atom tree: input lives on the
/// atoms of `level_of_x`, output on the atoms of `level_of_x - 1`.
ArrayXd cond_expect_atom(const SubFiltration& filt, int level_of_x,
                         const ArrayXd& atom_values);

/// E[X | G_k] for a terminal random variable X given per leaf.
ArrayXd cond_expect_terminal(const ScenarioTree& tree, const SubFiltration& filt,
                             int level, const ArrayXd& leaf_values);

/// Max deviation of node values from their atom means (0 for G-adapted data).
double atom_constancy_gap(const SubFiltration& filt, int level,
                          const ArrayXd& node_values);

/// Project every level of an F-process onto the atoms.
AdaptedProcess project_to_atoms(const ScenarioTree& tree, const SubFiltration& filt,
                                const AdaptedProcess& f_proc);

/// Lift every level of a G-process back to the nodes.
AdaptedProcess lift_process(const SubFiltration& filt, const AdaptedProcess& g_proc);

/// Stopping rule recorded pathwise: stop level per leaf.
struct StoppingTime {
  std::vector<int> level_of_leaf;

  int operator()(int leaf) const { return level_of_leaf[leaf]; }
};

/// Whether {tau <= k} is a union of level-k atoms for every k.
bool is_g_stopping_time(const ScenarioTree& tree, const SubFiltration& filt,
                        const StoppingTime& tau);

/// Exact number of stopping times with values in {from_level,..,N}.
/// Saturates at the cap rather than overflowing.
std::int64_t count_stopping_times(const SubFiltration& filt, int from_level,
                                  std::int64_t cap = 1'000'000);

/// Exhaustive duplicate-free enumeration of the subfiltration's stopping
/// times taking values in {from_level,..,N}. Throws a cap error naming the
/// count bound when the family is too large to list.
std::vector<StoppingTime> enumerate_stopping_times(const ScenarioTree& tree,
                                                   const SubFiltration& filt,
                                                   int from_level,
                                                   std::int64_t cap = 1'000'000);

/// Per-leaf sample of a G-process along a stopping time:
/// value(leaf) = phi_{tau(leaf)}(atom of the leaf's ancestor).
ArrayXd sample_at(const ScenarioTree& tree, const SubFiltration& filt,
                  const AdaptedProcess& g_proc, const StoppingTime& tau);

}  // namespace crbsde
