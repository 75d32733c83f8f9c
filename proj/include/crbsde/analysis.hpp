#pragma once

#include <string>
#include <vector>

#include "crbsde/solver.hpp"

namespace crbsde {

/// Affine driver a*y + b*z + c with per-level node arrays on 0..N-1.
/// The slope processes must be constant on atoms (G-adapted) wherever the
/// multiplicative-weight machinery is used.
struct LinearDriver {
  AdaptedProcess a;
  AdaptedProcess b;
  AdaptedProcess c;

  double slope_bound() const;      ///< max over levels/nodes of |a|, |b|
  Driver as_driver() const;        ///< generic driver view for the solvers
};

/// Multiplicative weight driven by the slopes: unit at the root and
/// gamma_{k+1} = gamma_k * (1 + a dt + b db) along each branch. Rejected
/// when any branch factor is nonpositive. `g_adapted` records whether the
/// result is constant on every atom.
struct GammaProcess {
  AdaptedProcess gamma;  // F, levels 0..N
  bool g_adapted = false;
  double adapt_gap = 0.0;
};

GammaProcess gamma_process(const ScenarioTree& tree, const SubFiltration& filt,
                           const LinearDriver& ld);

/// Exact solve for affine drivers: implicit in y per step, no outer
/// iteration. Requires a and b constant on atoms and max slope * dt < 1.
SolutionTriple solve_linear(const DCRBSDEProblem& p, const LinearDriver& ld);

/// Value of the affine equation stopped at tau ^ sigma, with terminal
/// payoff xi / lower obstacle / upper obstacle depending on who stopped
/// first (ties to the lower side). Nodes past the stop carry the frozen
/// payoff.
AdaptedProcess stopped_value(const ScenarioTree& tree, const SubFiltration& filt,
                             const LinearDriver& ld, const ArrayXd& terminal,
                             const AdaptedProcess& lower, const AdaptedProcess& upper,
                             const StoppingTime& tau, const StoppingTime& sigma);

struct SaddlePoint {
  StoppingTime tau_star;
  StoppingTime sigma_star;
};

/// First grid times at which the conditional slack to either obstacle
/// vanishes (within slack_tol), per atom trajectory, from a given level.
SaddlePoint saddle_point(const ScenarioTree& tree, const SubFiltration& filt,
                         const SolutionTriple& sol, const AdaptedProcess& lower,
                         const AdaptedProcess& upper, int from_level,
                         double slack_tol = 1e-9);

struct CompareReport {
  double min_margin = 0.0;  ///< min over levels/atoms of E[Y1-Y2 | G]
  int argmin_level = -1;
  int argmin_atom = -1;
};

/// Conditional comparison for two affine problems sharing the slope
/// processes: ordered conditional data implies ordered conditional
/// solutions. Unordered inputs raise a precondition error listing the
/// violations; the shared weight must be G-adapted.
CompareReport compare(const DCRBSDEProblem& p1, const LinearDriver& d1,
                      const DCRBSDEProblem& p2, const LinearDriver& d2);

}  // namespace crbsde
