#pragma once

#include <cstdint>
#include <vector>

#include "crbsde/solver.hpp"

namespace crbsde {

/// Two-mode production control under partial information: running profit
/// rates for the open and closed modes, and strictly positive costs for
/// stopping (closing) and starting (reopening).
struct SwitchingProblem {
  const ScenarioTree* tree = nullptr;
  const SubFiltration* filt = nullptr;
  AdaptedProcess psi_open;    // F, levels 0..N (level N unused by profit)
  AdaptedProcess psi_closed;  // F
  AdaptedProcess stop_cost;   // F, paid at odd switches before the horizon
  AdaptedProcess start_cost;  // F, paid at even switches before the horizon
};

void validate_switching(const SwitchingProblem& sp);

/// Nondecreasing tuple of stopping times; odd entries close production,
/// even entries reopen it. Switches exactly at the horizon are free no-ops,
/// so shorter plans embed as tuples padded with N.
struct Strategy {
  std::vector<StoppingTime> switches;
};

/// Expected total profit: running rate integrated at the left endpoints,
/// minus the realized switching costs.
double profit(const SwitchingProblem& sp, const Strategy& strategy);

/// The backward decomposition behind the switching value: the difference
/// of the mode values solves a doubly conditionally reflected equation
/// with driver psi_open - psi_closed and band [-stop_cost, start_cost].
struct SwitchingDecomposition {
  SolutionTriple core;      ///< the reflected equation for the difference
  AdaptedProcess y_open;    ///< value carrying the open-mode profit + K+
  AdaptedProcess y_closed;  ///< value carrying the closed-mode profit + K-
  double split_error = 0.0; ///< max |core.y - (y_open - y_closed)|
  double one_sided_slack = 0.0;    ///< min conditional slack of both sides
  double one_sided_flatoff = 0.0;  ///< max flat-off mass of both sides
};

SwitchingDecomposition decompose(const SwitchingProblem& sp);

/// Alternating first-hitting strategy read off the decomposition's
/// conditional slacks.
Strategy optimal_strategy(const SwitchingProblem& sp,
                          const SwitchingDecomposition& dec,
                          double slack_tol = 1e-9);

/// All strategies with exactly `max_switches` switch slots (padding at the
/// horizon embeds shorter plans), plus the empty strategy. Throws a cap
/// error when the family is larger than `cap`.
std::vector<Strategy> enumerate_strategies(const ScenarioTree& tree,
                                           const SubFiltration& filt,
                                           int max_switches,
                                           std::int64_t cap = 1'000'000);

std::int64_t count_strategies(const SubFiltration& filt, int max_switches,
                              std::int64_t cap = 1'000'000);

}  // namespace crbsde
