#include "gridflow/ac_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCore>
#ifdef GRIDFLOW_HAVE_KLU
#include <Eigen/KLUSupport>
#else
#include <Eigen/SparseLU>
#endif

#include "gridflow/error.hpp"

namespace gridflow {

namespace {

#ifdef GRIDFLOW_HAVE_KLU
using SparseFactorization = Eigen::KLU<Eigen::SparseMatrix<double>>;
#else
using SparseFactorization = Eigen::SparseLU<Eigen::SparseMatrix<double>>;
#endif

double max_abs(std::span<double const> v) {
    double m = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(x));
    }
    return m;
}

std::vector<double> mismatch_for(BusClassification const& cls, std::span<Complex const> spec,
                                 std::span<Complex const> S) {
    std::vector<double> out;
    out.reserve(cls.pv.size() + 2 * cls.pq.size());
    for (auto i : cls.pv) out.push_back(spec[i].real() - S[i].real());
    for (auto i : cls.pq) out.push_back(spec[i].real() - S[i].real());
    for (auto i : cls.pq) out.push_back(spec[i].imag() - S[i].imag());
    return out;
}

// Unknown ordering shared by the dense and sparse assemblies.
struct UnknownLayout {
    static constexpr std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> ang_pos;
    std::vector<std::size_t> mag_pos;
    std::size_t dim = 0;
};

UnknownLayout layout_for(BusClassification const& cls, std::size_t n) {
    UnknownLayout l{std::vector<std::size_t>(n, UnknownLayout::none), std::vector<std::size_t>(n, UnknownLayout::none), 0};
    std::size_t k = 0;
    for (auto i : cls.pv) l.ang_pos[i] = k++;
    for (auto i : cls.pq) l.ang_pos[i] = k++;
    for (auto i : cls.pq) l.mag_pos[i] = k++;
    l.dim = k;
    return l;
}

// Calls put(row, col, value) once per structural entry of the Jacobian.
template <typename Put>
void assemble_jacobian(UnknownLayout const& l, AdmittanceMatrix const& ybus, std::span<Complex const> V, Put&& put) {
    constexpr std::size_t none = UnknownLayout::none;
    auto const current = ybus.multiply(V);
    // dS_i/dtheta_k = -j V_i conj(Y_ik V_k) + [i==k] j V_i conj(I_i)
    // dS_i/d|V_k|   =    V_i conj(Y_ik V_k / |V_k|) + [i==k] conj(I_i) V_i / |V_i|
    // Mismatch rows are spec - S, so the Jacobian carries the opposite sign.
    Complex const j(0.0, 1.0);
    for (std::size_t i = 0; i < ybus.dimension; ++i) {
        std::size_t const row_p = l.ang_pos[i];
        std::size_t const row_q = l.mag_pos[i];
        if (row_p == none) continue;  // slack
        for (std::size_t p = ybus.row_offsets[i]; p < ybus.row_offsets[i + 1]; ++p) {
            std::size_t const col = ybus.columns[p];
            Complex const yv = ybus.values[p] * V[col];
            Complex d_ang = -j * V[i] * std::conj(yv);
            Complex d_mag = V[i] * std::conj(yv / std::abs(V[col]));
            if (col == i) {
                d_ang += j * V[i] * std::conj(current[i]);
                d_mag += std::conj(current[i]) * V[i] / std::abs(V[i]);
            }
            if (l.ang_pos[col] != none) {
                put(row_p, l.ang_pos[col], -d_ang.real());
                if (row_q != none) put(row_q, l.ang_pos[col], -d_ang.imag());
            }
            if (l.mag_pos[col] != none) {
                put(row_p, l.mag_pos[col], -d_mag.real());
                if (row_q != none) put(row_q, l.mag_pos[col], -d_mag.imag());
            }
        }
    }
}

JacobianSystem jacobian_for(BusClassification const& cls, AdmittanceMatrix const& ybus,
                            std::span<Complex const> V, std::vector<double> rhs) {
    auto const layout = layout_for(cls, ybus.dimension);
    JacobianSystem sys;
    sys.J = DenseMatrix(layout.dim);
    sys.rhs = std::move(rhs);
    sys.angle_buses.reserve(cls.pv.size() + cls.pq.size());
    sys.angle_buses.insert(sys.angle_buses.end(), cls.pv.begin(), cls.pv.end());
    sys.angle_buses.insert(sys.angle_buses.end(), cls.pq.begin(), cls.pq.end());
    sys.magnitude_buses = cls.pq;
    assemble_jacobian(layout, ybus, V, [&](std::size_t r, std::size_t c, double v) { sys.J(r, c) = v; });
    return sys;
}

void check_length(Grid const& grid, std::span<Complex const> V) {
    if (V.size() != grid.n_buses()) {
        throw Error(ErrorKind::DimensionMismatch, "voltage vector length " + std::to_string(V.size()) +
                                                      " vs " + std::to_string(grid.n_buses()) + " buses");
    }
}

}  // namespace

BusClassification classify_buses(Grid const& grid) {
    BusClassification cls;
    auto const slack = grid.slack_index();
    if (slack == Grid::npos) throw Error(ErrorKind::NoSlack, "grid '" + grid.name + "' has no slack bus");
    cls.slack = slack;
    std::vector<bool> has_gen(grid.n_buses(), false);
    for (auto const& gen : grid.generators) {
        if (gen.in_service) has_gen[grid.index_of(gen.bus_id)] = true;
    }
    for (std::size_t i = 0; i < grid.n_buses(); ++i) {
        if (i == slack) continue;
        (has_gen[i] ? cls.pv : cls.pq).push_back(i);
    }
    return cls;
}

std::vector<Complex> specified_injections(Grid const& grid) {
    auto const pg = grid.bus_generation();
    std::vector<Complex> spec(grid.n_buses());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        spec[i] = Complex(pg[i] - grid.buses[i].Pd, -grid.buses[i].Qd);
    }
    return spec;
}

std::vector<double> compute_mismatch(Grid const& grid, AdmittanceMatrix const& ybus, std::span<Complex const> V) {
    check_length(grid, V);
    auto const cls = classify_buses(grid);
    auto const spec = specified_injections(grid);
    auto const S = bus_injections(ybus, V);
    return mismatch_for(cls, spec, S);
}

JacobianSystem build_jacobian(Grid const& grid, AdmittanceMatrix const& ybus, std::span<Complex const> V) {
    check_length(grid, V);
    if (ybus.dimension != grid.n_buses()) throw Error(ErrorKind::DimensionMismatch, "ybus dimension");
    auto const cls = classify_buses(grid);
    auto const spec = specified_injections(grid);
    auto const S = bus_injections(ybus, V);
    return jacobian_for(cls, ybus, V, mismatch_for(cls, spec, S));
}

namespace {

struct PolarVoltages {
    std::vector<double> vm;
    std::vector<double> va;
};

PolarVoltages initial_polar(Grid const& grid, VoltageInit init) {
    std::size_t const n = grid.n_buses();
    std::size_t const slack = grid.slack_index();
    PolarVoltages out{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        if (init == VoltageInit::FlatStart) {
            out.vm[i] = 1.0;
            out.va[i] = (i == slack) ? grid.buses[i].Va : 0.0;
        } else {
            out.vm[i] = grid.buses[i].Vm;
            out.va[i] = grid.buses[i].Va;
        }
    }
    auto const vg = grid.bus_voltage_setpoint();
    for (std::size_t i = 0; i < n; ++i) {
        if (vg[i] > 0.0) out.vm[i] = vg[i];
    }
    return out;
}

}  // namespace

std::vector<Complex> initial_voltages(Grid const& grid, VoltageInit init) {
    auto const polar = initial_polar(grid, init);
    std::vector<Complex> V(polar.vm.size());
    for (std::size_t i = 0; i < V.size(); ++i) V[i] = std::polar(polar.vm[i], polar.va[i]);
    return V;
}

PFSolution solve_nr(Grid const& grid, NROptions const& options) {
    if (!(options.tolerance > 0.0) || options.max_iterations < 1) {
        throw Error(ErrorKind::InvalidArgument, "tolerance must be > 0 and max_iterations >= 1");
    }
    auto const ybus = build_ybus(grid);
    auto const cls = classify_buses(grid);
    auto const spec = specified_injections(grid);

    // magnitudes and angles are the iterated unknowns; V is derived from them
    auto [vm, va] = initial_polar(grid, options.init);
    std::vector<Complex> V(vm.size());
    for (std::size_t i = 0; i < V.size(); ++i) V[i] = std::polar(vm[i], va[i]);

    PFSolution sol;
    auto S = bus_injections(ybus, V);
    auto mismatch = mismatch_for(cls, spec, S);
    double norm = max_abs(mismatch);
    int iter = 0;
    bool failed = false;
    auto const layout = layout_for(cls, V.size());
    std::vector<Eigen::Triplet<double>> entries;
    Eigen::SparseMatrix<double> J(static_cast<Eigen::Index>(layout.dim), static_cast<Eigen::Index>(layout.dim));
    SparseFactorization lu;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(layout.dim));
    bool pattern_known = false;
    while (norm >= options.tolerance && iter < options.max_iterations) {
        entries.clear();
        assemble_jacobian(layout, ybus, V, [&](std::size_t r, std::size_t c, double v) {
            entries.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c), v);
        });
        J.setFromTriplets(entries.begin(), entries.end());
        // the sparsity pattern is fixed by Ybus, so the symbolic analysis is reused
        if (!pattern_known) {
            lu.analyzePattern(J);
            pattern_known = true;
        }
        lu.factorize(J);
        if (lu.info() != Eigen::Success) {
            failed = true;
            break;
        }
        // J dx = -mismatch
        for (std::size_t r = 0; r < layout.dim; ++r) rhs[static_cast<Eigen::Index>(r)] = -mismatch[r];
        Eigen::VectorXd const dx = lu.solve(rhs);
        ++iter;
        for (std::size_t i = 0; i < V.size(); ++i) {
            if (layout.ang_pos[i] != UnknownLayout::none) va[i] += dx[static_cast<Eigen::Index>(layout.ang_pos[i])];
            if (layout.mag_pos[i] != UnknownLayout::none) vm[i] += dx[static_cast<Eigen::Index>(layout.mag_pos[i])];
        }
        for (std::size_t i = 0; i < V.size(); ++i) V[i] = std::polar(vm[i], va[i]);

        S = bus_injections(ybus, V);
        mismatch = mismatch_for(cls, spec, S);
        norm = max_abs(mismatch);
        if (!std::isfinite(norm) || norm > 1e10) {
            failed = true;
            break;
        }
    }

    sol.iterations = iter;
    sol.max_mismatch = norm;
    sol.converged = !failed && norm < options.tolerance;
    sol.slack_P = S[cls.slack].real();
    sol.slack_Q = S[cls.slack].imag();
    sol.V = std::move(V);
    sol.Vm = std::move(vm);
    sol.Va = std::move(va);
    if (sol.converged) sol.flows = branch_flows(grid, sol.V);
    return sol;
}

}  // namespace gridflow
