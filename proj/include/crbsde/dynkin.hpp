#pragma once

#include <cstdint>
#include <utility>

#include "crbsde/filtration.hpp"
#include "crbsde/tree.hpp"

namespace crbsde {

/// Who collects when both players stop at the same instant. The stopping
/// criterion xi(tau) 1{tau <= sigma} + zeta(sigma) 1{sigma < tau} hands
/// ties to the maximizer (`lower`); the mirrored criterion with
/// 1{sigma <= tau} hands them to the minimizer (`upper`). The two games
/// agree whenever xi <= zeta but differ on crossed rewards.
enum class GameTie { lower, upper };

/// Reward pair for a stopping game over the subfiltration: the maximizer
/// collects `lower` (xi), the minimizer pays `upper` (zeta). Both are
/// G-processes with exactly zero terminal level.
struct RewardPair {
  AdaptedProcess lower;
  AdaptedProcess upper;
};

/// Throws unless both rewards are complete G-shaped processes with zero
/// terminal values.
void validate_rewards(const SubFiltration& filt, const RewardPair& rw);

/// Lower value, upper value, and common value of a stopping game, all
/// G-processes. `gap` is the largest atomwise distance between the lower
/// and upper values.
struct ValueProfile {
  AdaptedProcess lower_value;
  AdaptedProcess upper_value;
  AdaptedProcess value;
  double gap = 0.0;
};

/// Smallest G-supermartingale dominating phi: backward recursion
/// R_N = phi_N, R_k = max(phi_k, E[R_{k+1} | G_k]).
AdaptedProcess snell_envelope(const ScenarioTree& tree, const SubFiltration& filt,
                              const AdaptedProcess& phi);

/// Minimal nonnegative supermartingale pair solving the coupled system
/// up = R(down + xi), down = R(up - zeta); the game value is up - down.
struct SnellPair {
  AdaptedProcess up;
  AdaptedProcess down;
  int sweeps = 0;
};

/// Monotone iteration from the zero pair. Diverges (cap error) exactly
/// when no integrable dominating pair exists, e.g. on crossed rewards.
SnellPair coupled_families(const ScenarioTree& tree, const SubFiltration& filt,
                           const RewardPair& rw, double tol = 1e-12,
                           int sweep_cap_per_step = 10);

/// Game value by one backward sweep. Under `GameTie::lower` the step is
/// max(xi, min(zeta, continuation)); under `GameTie::upper` the clipping
/// order flips. When the rewards are sandwiched (xi <= zeta) the result is
/// cross-checked against coupled_families.
ValueProfile game_value_recursive(const ScenarioTree& tree, const SubFiltration& filt,
                                  const RewardPair& rw,
                                  GameTie tie = GameTie::lower);

/// Value by exhausting all stopping-time pairs: atomwise
/// lower = max_tau min_sigma E[payoff | G_k], upper = min_sigma max_tau.
ValueProfile game_value_bruteforce(const ScenarioTree& tree, const SubFiltration& filt,
                                   const RewardPair& rw, GameTie tie = GameTie::lower,
                                   std::int64_t cap = 1'000'000);

/// Zero the common terminal of a reward pair by subtracting its
/// conditional expectation at every level; game values shift by the same
/// process.
struct ShiftedRewards {
  RewardPair rewards;
  AdaptedProcess shift;  ///< E[terminal | G_k], to be added back to values
};
ShiftedRewards reward_shift(const ScenarioTree& tree, const SubFiltration& filt,
                            const AdaptedProcess& xi, const AdaptedProcess& zeta);

}  // namespace crbsde
