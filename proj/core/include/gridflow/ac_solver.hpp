#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gridflow/dense_lu.hpp"
#include "gridflow/grid.hpp"

namespace gridflow {

enum class VoltageInit { CaseVoltages, FlatStart };

struct NROptions {
    double tolerance = 1e-8;  // on the max-norm of the mismatch, p.u.
    int max_iterations = 30;
    VoltageInit init = VoltageInit::CaseVoltages;
};

struct BusClassification {
    std::size_t slack = 0;
    std::vector<std::size_t> pv;
    std::vector<std::size_t> pq;
};

/// Unknown ordering shared by the mismatch vector and the Jacobian:
/// angles of [pv..., pq...] followed by magnitudes of [pq...].
struct JacobianSystem {
    DenseMatrix J;
    std::vector<double> rhs;  // the mismatch at the linearization point
    std::vector<std::size_t> angle_buses;
    std::vector<std::size_t> magnitude_buses;

    std::size_t dimension() const { return J.n; }
};

/// Slack is the unique type-3 bus; PV buses hold an in-service generator.
/// Throws Error(NoSlack).
BusClassification classify_buses(Grid const& grid);

/// Specified net injections per bus: P = sum(Pg) - Pd, Q = -Qd.
std::vector<Complex> specified_injections(Grid const& grid);

/// [dP(pv, pq); dQ(pq)] with d = specified - computed.
std::vector<double> compute_mismatch(Grid const& grid, AdmittanceMatrix const& ybus, std::span<Complex const> V);

/// Analytic partial derivatives of compute_mismatch w.r.t. [angles; magnitudes].
JacobianSystem build_jacobian(Grid const& grid, AdmittanceMatrix const& ybus, std::span<Complex const> V);

/// Initial voltages: generator setpoints imposed on slack/PV buses.
std::vector<Complex> initial_voltages(Grid const& grid, VoltageInit init);

/// Newton-Raphson power flow. Failure to converge (iteration cap, singular
/// Jacobian, divergence) is reported through PFSolution::converged.
PFSolution solve_nr(Grid const& grid, NROptions const& options = {});

}  // namespace gridflow
