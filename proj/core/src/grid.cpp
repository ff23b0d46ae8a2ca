#include "gridflow/grid.hpp"

#include <algorithm>
#include <utility>

#include "gridflow/error.hpp"

namespace gridflow {

void Grid::reindex() {
    id_to_index_.clear();
    id_to_index_.reserve(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) {
        id_to_index_.emplace(buses[i].id, i);
    }
}

std::size_t Grid::index_of(int id) const {
    auto it = id_to_index_.find(id);
    if (it == id_to_index_.end()) {
        throw Error(ErrorKind::DanglingBranch, "bus id " + std::to_string(id) + " does not exist");
    }
    return it->second;
}

std::size_t Grid::n_in_service_branches() const {
    return static_cast<std::size_t>(
        std::count_if(branches.begin(), branches.end(), [](Branch const& br) { return br.in_service; }));
}

std::vector<double> Grid::bus_generation() const {
    std::vector<double> pg(buses.size(), 0.0);
    for (auto const& gen : generators) {
        if (gen.in_service) pg[index_of(gen.bus_id)] += gen.Pg;
    }
    return pg;
}

std::vector<double> Grid::bus_voltage_setpoint() const {
    std::vector<double> vg(buses.size(), 0.0);
    std::vector<bool> seen(buses.size(), false);
    for (auto const& gen : generators) {
        if (!gen.in_service) continue;
        auto i = index_of(gen.bus_id);
        if (!seen[i]) {
            vg[i] = gen.Vg;
            seen[i] = true;
        }
    }
    return vg;
}

std::size_t Grid::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].type == BusType::Slack) return i;
    }
    return npos;
}

Complex AdmittanceMatrix::at(std::size_t i, std::size_t k) const {
    auto first = columns.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
    auto last = columns.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
    auto it = std::lower_bound(first, last, k);
    if (it == last || *it != k) return {};
    return values[static_cast<std::size_t>(it - columns.begin())];
}

std::vector<Complex> AdmittanceMatrix::multiply(std::span<Complex const> v) const {
    if (v.size() != dimension) {
        throw Error(ErrorKind::DimensionMismatch,
                    "vector length " + std::to_string(v.size()) + " vs dimension " + std::to_string(dimension));
    }
    std::vector<Complex> out(dimension);
    for (std::size_t i = 0; i < dimension; ++i) {
        Complex acc{};
        for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p) {
            acc += values[p] * v[columns[p]];
        }
        out[i] = acc;
    }
    return out;
}

BranchAdmittance branch_admittance(Branch const& branch) {
    Complex const y = 1.0 / Complex(branch.r, branch.x);
    Complex const charging(0.0, branch.b / 2.0);
    Complex const tap = std::polar(branch.effective_tau(), branch.shift);
    return {
        .yff = (y + charging) / std::norm(tap),
        .yft = -y / std::conj(tap),
        .ytf = -y / tap,
        .ytt = y + charging,
    };
}

AdmittanceMatrix build_ybus(Grid const& grid) {
    std::size_t const n = grid.n_buses();
    std::vector<std::vector<std::pair<std::size_t, Complex>>> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i].emplace_back(i, Complex(grid.buses[i].Gs, grid.buses[i].Bs));
    }
    for (auto const& br : grid.branches) {
        if (!br.in_service) continue;
        if (br.x == 0.0) {
            throw Error(ErrorKind::ZeroReactance, "branch " + std::to_string(br.from_bus) + "-" +
                                                      std::to_string(br.to_bus) + " has x = 0");
        }
        auto const f = grid.index_of(br.from_bus);
        auto const t = grid.index_of(br.to_bus);
        auto const y = branch_admittance(br);
        rows[f].emplace_back(f, y.yff);
        rows[f].emplace_back(t, y.yft);
        rows[t].emplace_back(f, y.ytf);
        rows[t].emplace_back(t, y.ytt);
    }

    AdmittanceMatrix ybus;
    ybus.dimension = n;
    ybus.row_offsets.reserve(n + 1);
    ybus.row_offsets.push_back(0);
    for (auto& row : rows) {
        std::stable_sort(row.begin(), row.end(), [](auto const& a, auto const& b) { return a.first < b.first; });
        for (std::size_t p = 0; p < row.size();) {
            auto const col = row[p].first;
            Complex sum{};
            for (; p < row.size() && row[p].first == col; ++p) sum += row[p].second;
            ybus.columns.push_back(col);
            ybus.values.push_back(sum);
        }
        ybus.row_offsets.push_back(ybus.columns.size());
    }
    return ybus;
}

std::vector<Complex> bus_injections(AdmittanceMatrix const& ybus, std::span<Complex const> V) {
    auto current = ybus.multiply(V);
    for (std::size_t i = 0; i < current.size(); ++i) {
        current[i] = V[i] * std::conj(current[i]);
    }
    return current;
}

std::vector<BranchFlow> branch_flows(Grid const& grid, std::span<Complex const> V) {
    if (V.size() != grid.n_buses()) {
        throw Error(ErrorKind::DimensionMismatch, "voltage vector length " + std::to_string(V.size()) +
                                                      " vs " + std::to_string(grid.n_buses()) + " buses");
    }
    std::vector<BranchFlow> flows;
    flows.reserve(grid.branches.size());
    for (auto const& br : grid.branches) {
        if (!br.in_service) continue;
        auto const y = branch_admittance(br);
        Complex const vf = V[grid.index_of(br.from_bus)];
        Complex const vt = V[grid.index_of(br.to_bus)];
        Complex const i_f = y.yff * vf + y.yft * vt;
        Complex const i_t = y.ytf * vf + y.ytt * vt;
        Complex const s_f = vf * std::conj(i_f);
        Complex const s_t = vt * std::conj(i_t);
        flows.push_back({s_f.real(), s_f.imag(), i_f.real(), i_f.imag(), s_t.real(), s_t.imag(), i_t.real(),
                         i_t.imag()});
    }
    return flows;
}

}  // namespace gridflow
