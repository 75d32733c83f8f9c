#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "crbsde/filtration.hpp"
#include "crbsde/tree.hpp"

namespace crbsde {

/// Generator of the backward dynamics, evaluated per level and node.
/// `lipschitz` is the declared constant in (y, z); it is validated by
/// random probing, not trusted blindly.
struct Driver {
  std::function<double(int level, int node, double y, double z)> f;
  double lipschitz = 0.0;
  bool depends_on_yz = true;
};

Driver constant_driver(double value);
/// Driver reading a precomputed F-process, independent of (y, z).
Driver process_driver(AdaptedProcess values);

/// A doubly conditionally reflected backward equation on a scenario tree:
/// terminal condition per leaf, driver, and obstacle processes whose
/// conditional expectations sandwich E[Y | G].
struct DCRBSDEProblem {
  const ScenarioTree* tree = nullptr;
  const SubFiltration* filt = nullptr;
  ArrayXd terminal;
  Driver driver;
  AdaptedProcess lower;  // F-process, levels 0..N
  AdaptedProcess upper;  // F-process, levels 0..N
};

/// Checks shapes, the declared Lipschitz bound on random probes (H1),
/// strict obstacle separation (H2) and the conditional terminal sandwich
/// (H3). Throws a precondition error naming the offending level/atom.
void validate_problem(const DCRBSDEProblem& p);

struct SolveDiagnostics {
  double dynamics_residual = 0.0;  ///< max branchwise defect of the dynamics
  double constraint_slack = 0.0;   ///< min conditional slack (negative = violated)
  double flatoff_lower = 0.0;      ///< max per-trajectory mass of slack * dK+
  double flatoff_upper = 0.0;
  double k_min_increment = 0.0;    ///< most negative increment of K+ or K-
  double k_adapt_gap = 0.0;        ///< atom-constancy gap of K increments
  bool k_adapted = true;

  bool pass(double dyn_tol = 1e-9, double slack_tol = 1e-10,
            double flat_tol = 1e-10) const {
    return dynamics_residual <= dyn_tol && constraint_slack >= -slack_tol &&
           flatoff_lower <= flat_tol && flatoff_upper <= flat_tol &&
           k_min_increment >= -1e-12 && k_adapted;
  }
};

struct SolutionTriple {
  AdaptedProcess y;        // F, levels 0..N
  AdaptedProcess z;        // F, levels 0..N-1
  AdaptedProcess k_plus;   // G, cumulative, zero at level 0
  AdaptedProcess k_minus;  // G, cumulative, zero at level 0
  SolveDiagnostics diagnostics;
  int iterations = 0;
  std::vector<double> picard_gaps;  ///< squared beta-norm of successive diffs
};

/// Driver independent of (y, z): clipped conditional backward recursion,
/// regulator increments from the clip corrections, then the martingale
/// lift of Y and Z.
SolutionTriple solve_constant_driver(const DCRBSDEProblem& p);

struct PicardOptions {
  double beta_norm_tol = 1e-10;  ///< stop on the beta-weighted norm ...
  double sup_tol = 1e-12;        ///< ... and on the pathwise sup change
  int max_iterations = 200;
};

/// Lipschitz driver: freeze (y, z) at the previous iterate, solve the
/// constant-driver problem, repeat. Requires lipschitz * dt < 1.
SolutionTriple solve_picard(const DCRBSDEProblem& p, const PicardOptions& opt = {});

/// Penalized approximation at level n: the constraint is not enforced but
/// charged at rate n per unit of conditional violation. Each backward step
/// solves its scalar piecewise-linear atom equation in closed form.
SolutionTriple solve_penalized(const DCRBSDEProblem& p, double n);

struct PenalizationReport {
  std::vector<double> n;
  std::vector<double> violation;  ///< worst conditional constraint violation
  std::vector<double> distance;   ///< sup distance to the exactly solved Y
  double fitted_slope = 0.0;      ///< log-log slope of violation vs n
  bool all_feasible = false;      ///< every penalized run already satisfied bounds
};

PenalizationReport penalization_sweep(const DCRBSDEProblem& p,
                                      const std::vector<double>& n_grid);

/// Geometric penalty grid 2^lo .. 2^hi, optionally scaled by 1/dt.
std::vector<double> default_penalty_grid(const DCRBSDEProblem& p, int lo = 4,
                                         int hi = 12, bool scale_by_inv_dt = true);

/// Audits a candidate triple against the full system: dynamics defect,
/// conditional constraint, flat-off masses, regulator monotonicity and
/// G-adaptedness. Never throws on a bad triple; inspect the diagnostics.
SolveDiagnostics verify_solution(const DCRBSDEProblem& p, const SolutionTriple& s);

/// Left side: E[sup|Y1-Y2|^2 + sum|Z1-Z2|^2 dt + sup|K1-K2|^2]. Right
/// side: E[|xi1-xi2|^2 + sum|f1-f2|^2(Y2,Z2) dt]. Problems must share the
/// obstacles. The caller owns the constant.
std::pair<double, double> stability_estimate(const DCRBSDEProblem& p1,
                                             const DCRBSDEProblem& p2,
                                             const SolutionTriple& s1,
                                             const SolutionTriple& s2);

}  // namespace crbsde
