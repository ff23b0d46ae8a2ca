#include "gridflow/dc_solver.hpp"

#include "gridflow/dense_lu.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

DCSolution solve_dc(Grid const& grid) {
    std::size_t const n = grid.n_buses();
    std::size_t const slack = grid.slack_index();
    if (slack == Grid::npos) throw Error(ErrorKind::NoSlack, "grid '" + grid.name + "' has no slack bus");

    DenseMatrix bbus(n);
    std::vector<double> shift_injection(n, 0.0);
    for (auto const& br : grid.branches) {
        if (!br.in_service) continue;
        if (br.x == 0.0) throw Error(ErrorKind::ZeroReactance, "branch with x = 0");
        double const b = 1.0 / (br.x * br.effective_tau());
        auto const f = grid.index_of(br.from_bus);
        auto const t = grid.index_of(br.to_bus);
        bbus(f, f) += b;
        bbus(t, t) += b;
        bbus(f, t) -= b;
        bbus(t, f) -= b;
        // flow f->t = b (theta_f - theta_t - shift): the shift term acts as an injection pair
        shift_injection[f] -= b * br.shift;
        shift_injection[t] += b * br.shift;
    }

    auto const pg = grid.bus_generation();
    std::vector<double> p_spec(n);
    for (std::size_t i = 0; i < n; ++i) {
        p_spec[i] = pg[i] - grid.buses[i].Pd - grid.buses[i].Gs;
    }

    DCSolution sol;
    sol.theta.assign(n, 0.0);
    double const theta_ref = grid.buses[slack].Va;
    sol.theta[slack] = theta_ref;

    if (n > 1) {
        std::vector<std::size_t> unknown;
        unknown.reserve(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            if (i != slack) unknown.push_back(i);
        }
        DenseMatrix reduced(unknown.size());
        std::vector<double> rhs(unknown.size());
        for (std::size_t a = 0; a < unknown.size(); ++a) {
            std::size_t const i = unknown[a];
            for (std::size_t c = 0; c < unknown.size(); ++c) reduced(a, c) = bbus(i, unknown[c]);
            rhs[a] = p_spec[i] - shift_injection[i] - bbus(i, slack) * theta_ref;
        }
        auto lu = DenseLU::factor(std::move(reduced));
        if (!lu) throw Error(ErrorKind::SingularBMatrix, "B matrix is singular (islanded buses?)");
        auto const x = lu->solve(rhs);
        for (std::size_t a = 0; a < unknown.size(); ++a) sol.theta[unknown[a]] = x[a];
    }

    sol.injections.assign(n, 0.0);
    for (auto const& br : grid.branches) {
        if (!br.in_service) continue;
        double const b = 1.0 / (br.x * br.effective_tau());
        auto const f = grid.index_of(br.from_bus);
        auto const t = grid.index_of(br.to_bus);
        double const pf = b * (sol.theta[f] - sol.theta[t] - br.shift);
        sol.injections[f] += pf;
        sol.injections[t] -= pf;
        sol.flows.push_back({pf, 0.0, 0.0, 0.0, -pf, 0.0, 0.0, 0.0});
    }
    return sol;
}

std::vector<BranchFlow> dc_targets(Grid const& grid, DCSolution const& dc) {
    std::vector<Complex> V(dc.theta.size());
    for (std::size_t i = 0; i < V.size(); ++i) V[i] = std::polar(1.0, dc.theta[i]);
    return branch_flows(grid, V);
}

}  // namespace gridflow
