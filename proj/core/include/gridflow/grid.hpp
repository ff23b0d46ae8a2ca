#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace gridflow {

using Complex = std::complex<double>;

enum class BusType { PQ = 1, PV = 2, Slack = 3 };

// All electrical quantities are per-unit on Grid::baseMVA, angles in radians.
struct Bus {
    int id = 0;
    BusType type = BusType::PQ;
    double Pd = 0.0;
    double Qd = 0.0;
    double Gs = 0.0;
    double Bs = 0.0;
    double Vm = 1.0;
    double Va = 0.0;
    double base_kV = 0.0;

    friend bool operator==(Bus const&, Bus const&) = default;
};

struct Generator {
    int bus_id = 0;
    double Pg = 0.0;
    double Qg = 0.0;
    double Qmax = 0.0;  // parsed, never enforced
    double Qmin = 0.0;
    double Pmax = 0.0;
    double Pmin = 0.0;
    double Vg = 1.0;
    bool in_service = true;

    friend bool operator==(Generator const&, Generator const&) = default;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;      // total line charging susceptance
    double tau = 0.0;    // off-nominal turns ratio, 0 means "no transformer"
    double shift = 0.0;  // phase shift angle
    bool in_service = true;

    bool is_transformer() const { return tau != 0.0; }
    double effective_tau() const { return tau == 0.0 ? 1.0 : tau; }

    friend bool operator==(Branch const&, Branch const&) = default;
};

/// Per-unit grid model with a dense bus index (0..N_b-1) in file order.
/// External bus ids are kept for I/O; call reindex() after editing `buses`.
struct Grid {
    std::string name;
    double baseMVA = 100.0;
    std::vector<Bus> buses;
    std::vector<Generator> generators;
    std::vector<Branch> branches;

    void reindex();
    bool has_bus(int id) const { return id_to_index_.contains(id); }
    /// Throws Error(DanglingBranch) for an unknown id.
    std::size_t index_of(int id) const;

    std::size_t n_buses() const { return buses.size(); }
    std::size_t n_in_service_branches() const;

    /// Summed in-service active generation per bus index.
    std::vector<double> bus_generation() const;
    /// Setpoint of the first in-service generator at each bus, 0 when none.
    std::vector<double> bus_voltage_setpoint() const;
    /// Index of the first type-3 bus, or npos.
    std::size_t slack_index() const;

    friend bool operator==(Grid const& a, Grid const& b) {
        return a.name == b.name && a.baseMVA == b.baseMVA && a.buses == b.buses &&
               a.generators == b.generators && a.branches == b.branches;
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  private:
    std::unordered_map<int, std::size_t> id_to_index_;
};

/// Row-compressed complex sparse matrix; column indices sorted per row.
struct AdmittanceMatrix {
    std::size_t dimension = 0;
    std::vector<std::size_t> row_offsets;
    std::vector<std::size_t> columns;
    std::vector<Complex> values;

    /// Entry (i,k), zero if structurally absent.
    Complex at(std::size_t i, std::size_t k) const;
    std::vector<Complex> multiply(std::span<Complex const> v) const;
};

/// The 2x2 pi-model admittance of one branch: [I_f; I_t] = [yff yft; ytf ytt][V_f; V_t].
struct BranchAdmittance {
    Complex yff, yft, ytf, ytt;
};

/// (Re S_f, Im S_f, Re I_f, Im I_f, Re S_t, Im S_t, Re I_t, Im I_t), per-unit.
using BranchFlow = std::array<double, 8>;

struct PFSolution {
    std::vector<Complex> V;
    std::vector<double> Vm;  // polar form of V as iterated (setpoints kept bit-exact)
    std::vector<double> Va;
    double slack_P = 0.0;  // net active injection at the slack bus
    double slack_Q = 0.0;
    std::vector<BranchFlow> flows;  // one per in-service branch, grid order
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
};

BranchAdmittance branch_admittance(Branch const& branch);

/// Throws Error(ZeroReactance) or Error(DanglingBranch).
AdmittanceMatrix build_ybus(Grid const& grid);

/// S_i = V_i * conj(sum_k Y_ik V_k).
std::vector<Complex> bus_injections(AdmittanceMatrix const& ybus, std::span<Complex const> V);

/// Flow records for every in-service branch, in grid order.
std::vector<BranchFlow> branch_flows(Grid const& grid, std::span<Complex const> V);

}  // namespace gridflow
