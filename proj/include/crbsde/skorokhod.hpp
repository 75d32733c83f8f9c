#pragma once

#include <utility>

#include "crbsde/filtration.hpp"
#include "crbsde/tree.hpp"

namespace crbsde {

/// Lower/upper boundaries of a time-dependent interval along the grid.
/// Strict separation min(upper - lower) > 0 is required wherever the
/// reflection map runs.
struct BarrierPair {
  ArrayXd lower;
  ArrayXd upper;
};

/// Solution of the discrete two-sided Skorokhod problem:
/// y = x + k_plus - k_minus with lower <= y <= upper, k_plus/k_minus
/// nondecreasing and acting only when the matching barrier is active.
/// Starting points outside the band are pulled in at index 0, recorded
/// as an initial increment.
struct ReflectedOutput {
  ArrayXd y;
  ArrayXd k_plus;
  ArrayXd k_minus;
  ArrayXd k;  ///< net regulator k_plus - k_minus
};

/// Explicit reflection map evaluated by O(N) running-extrema recurrences.
ReflectedOutput two_sided_map(const ArrayXd& x, const BarrierPair& b);

/// Same map evaluated by the nested max/inf formula directly, O(N^2).
/// Kept permanently as a reference implementation.
ReflectedOutput two_sided_map_direct(const ArrayXd& x, const BarrierPair& b);

/// Independent oracle: alternate the one-sided lower and upper maps until
/// the path stops moving. Terminates under strict barrier separation.
ReflectedOutput iterative_oracle(const ArrayXd& x, const BarrierPair& b,
                                 double tol = 1e-13, int cap = 10'000);

/// Ingredients of the stability bound for the reflection map: first the
/// sup distance of the two regulators, then the sup distance of paths plus
/// barriers. The caller owns the constant.
std::pair<double, double> stability_gap(const ArrayXd& x1, const ArrayXd& x2,
                                        const BarrierPair& b1, const BarrierPair& b2);

/// Rebuild the regulator of a solved conditionally reflected equation from
/// (y, z) alone, via the reversed-time reflection formula applied per atom
/// trajectory. `driver_values` holds the realized driver as an F-process on
/// levels 0..N-1. Rejects inputs whose dynamics residual exceeds `dyn_tol`.
AdaptedProcess k_from_solution(const ScenarioTree& tree, const SubFiltration& filt,
                               const AdaptedProcess& y, const AdaptedProcess& z,
                               const AdaptedProcess& driver_values,
                               const ArrayXd& terminal, const AdaptedProcess& lower,
                               const AdaptedProcess& upper, double dyn_tol = 1e-9);

}  // namespace crbsde
