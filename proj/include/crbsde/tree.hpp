#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "crbsde/errors.hpp"

namespace crbsde {

using Eigen::ArrayXd;

/// One level of a non-recombining scenario tree, stored column-wise.
/// Nodes at level k+1 are ordered so that siblings are contiguous and
/// parents appear in nondecreasing order.
struct TreeLevel {
  std::vector<int> parent;  ///< index into the previous level, -1 at the root
  ArrayXd branch_prob;      ///< probability of the edge into each node
  ArrayXd branch_db;        ///< Brownian increment carried by that edge
  ArrayXd path_prob;        ///< probability of the root-to-node path
  ArrayXd cum_db;           ///< accumulated increment along that path

  int count() const { return static_cast<int>(parent.size()); }
};

/// Finite non-recombining event tree over a uniform time grid 0..N.
/// The leaves at level N are the sample space; branch probabilities at
/// every node sum to one and the labelled increments have zero mean, so
/// the increment process is a martingale standing in for the driving
/// noise.
class ScenarioTree {
 public:
  ScenarioTree(double horizon, std::vector<std::vector<int>> parents,
               std::vector<std::vector<double>> probs,
               std::vector<std::vector<double>> dbs);

  /// Symmetric binary tree: two children per node, p = 1/2, db = +-sqrt(dt).
  static ScenarioTree binary(int num_steps, double horizon);
  /// Single-branch tree realizing a deterministic scenario (db = 0).
  static ScenarioTree chain(int num_steps, double horizon);
  /// Binary tree with randomized branch probabilities in [0.25, 0.75];
  /// increments are scaled so every node keeps E[db] = 0 and E[db^2] = dt.
  static ScenarioTree random_binary(int num_steps, double horizon,
                                    std::uint64_t seed);
  /// Mixed 2/3-ary tree with random recentred increments. Exact
  /// martingale representation is generally unavailable on such trees;
  /// they serve expectation-only workflows.
  static ScenarioTree random_mary(int num_steps, double horizon,
                                  std::uint64_t seed);

  int num_steps() const { return static_cast<int>(levels_.size()) - 1; }
  double horizon() const { return horizon_; }
  double dt() const { return horizon_ / num_steps(); }
  double time_at(int level) const { return level * dt(); }

  const TreeLevel& level(int k) const { return levels_.at(k); }
  int node_count(int k) const { return levels_.at(k).count(); }
  int leaf_count() const { return levels_.back().count(); }

  /// Children of node i at level k, as an index range into level k+1.
  std::pair<int, int> children(int k, int node) const;
  /// Ancestor of a level-N leaf at the given level.
  int ancestor(int leaf, int at_level) const;
  /// Ancestor of a node at `level` at some earlier level.
  int ancestor_of(int level, int node, int at_level) const;

  bool is_binary() const;

 private:
  double horizon_ = 0.0;
  std::vector<TreeLevel> levels_;
  std::vector<std::vector<int>> child_begin_;  // per level, size count+1
};

/// Whether per-level values index tree nodes or subfiltration atoms.
enum class Filt { F, G };

/// Real values attached per time step either to nodes (F) or atoms (G).
struct AdaptedProcess {
  Filt tag = Filt::F;
  std::vector<ArrayXd> levels;

  int num_levels() const { return static_cast<int>(levels.size()); }
  ArrayXd& operator[](int k) { return levels.at(k); }
  const ArrayXd& operator[](int k) const { return levels.at(k); }
};

/// Zero-initialized F-process covering levels 0..up_to (inclusive).
AdaptedProcess make_f_process(const ScenarioTree& tree, int up_to);

/// One-step conditional expectation toward the root: input lives on
/// `level_of_x`, output on `level_of_x - 1`.
ArrayXd cond_expect_F(const ScenarioTree& tree, int level_of_x,
                      const ArrayXd& x);

/// Unconditional expectation of a level-k node array.
double expect(const ScenarioTree& tree, int level, const ArrayXd& x);

/// Martingale-representation coefficient: the unique z with
/// x(child) = E[x|parent] + z * db(child) on binary trees. On wider
/// branchings z is fitted and the per-branch residual must stay below
/// `residual_tol`, otherwise a representation failure is raised.
ArrayXd martingale_coeff(const ScenarioTree& tree, int level_of_x,
                         const ArrayXd& x, double residual_tol = 1e-10);

}  // namespace crbsde
