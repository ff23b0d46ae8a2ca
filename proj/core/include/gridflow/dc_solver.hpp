#pragma once

#include <vector>

#include "gridflow/grid.hpp"

namespace gridflow {

struct DCSolution {
    std::vector<double> theta;           // bus angles, radians
    std::vector<double> injections;      // lossless net active injection per bus
    std::vector<BranchFlow> flows;       // Pf in slot 0, Pt = -Pf in slot 4, rest zero
};

/// Linear DC power flow. Series susceptance 1/(x * tau_eff); phase shifts
/// enter as equivalent injections; bus shunt conductance is a constant load
/// at |V| = 1. Throws Error(SingularBMatrix) for an islanded non-slack part.
DCSolution solve_dc(Grid const& grid);

/// Re-embeds the DC angles as V = 1 * e^{j theta} and evaluates the full
/// 8-quantity AC branch records, one row per in-service branch.
std::vector<BranchFlow> dc_targets(Grid const& grid, DCSolution const& dc);

}  // namespace gridflow
