#include "gridflow/line_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "gridflow/error.hpp"

namespace gridflow {

namespace {

void write_bus_block(std::span<double> out, Bus const& bus, double pg, double vg, bool slack) {
    out[0] = bus.Pd;
    out[1] = bus.Qd;
    out[2] = bus.Gs;
    out[3] = bus.Bs;
    out[4] = pg;
    out[5] = vg;
    out[6] = slack ? 0.0 : 1.0;
    out[7] = slack ? 1.0 : 0.0;
}

}  // namespace

LineGraph build_line_graph(Grid const& grid) {
    LineGraph lg;
    std::vector<std::vector<std::size_t>> incident(grid.n_buses());
    for (std::size_t k = 0; k < grid.branches.size(); ++k) {
        auto const& br = grid.branches[k];
        if (!br.in_service) continue;
        std::size_t const v = lg.branch_of_vertex.size();
        lg.branch_of_vertex.push_back(k);
        auto const f = grid.index_of(br.from_bus);
        auto const t = grid.index_of(br.to_bus);
        incident[f].push_back(v);
        if (t != f) incident[t].push_back(v);
    }
    std::vector<SparseMatrix::Entry> entries;
    for (auto const& verts : incident) {
        for (std::size_t a = 0; a < verts.size(); ++a) {
            for (std::size_t b = a + 1; b < verts.size(); ++b) {
                entries.push_back({verts[a], verts[b], 1.0});
                entries.push_back({verts[b], verts[a], 1.0});
            }
        }
    }
    std::size_t const n = lg.branch_of_vertex.size();
    lg.adjacency = SparseMatrix::from_entries(n, n, std::move(entries));
    // parallel branches share both endpoints; keep the adjacency binary
    for (auto& v : lg.adjacency.values) v = 1.0;
    return lg;
}

Tensor assemble_features(Grid const& grid) {
    auto const pg = grid.bus_generation();
    auto const vg = grid.bus_voltage_setpoint();
    Tensor x(grid.n_in_service_branches(), kFeatureWidth);
    std::size_t v = 0;
    for (auto const& br : grid.branches) {
        if (!br.in_service) continue;
        auto row = x.row(v++);
        row[0] = br.r;
        row[1] = br.x;
        row[2] = br.b;
        row[3] = br.tau;
        row[4] = br.shift;
        auto const f = grid.index_of(br.from_bus);
        auto const t = grid.index_of(br.to_bus);
        auto const& fb = grid.buses[f];
        auto const& tb = grid.buses[t];
        write_bus_block(row.subspan(kBranchFeatureWidth, kBusFeatureWidth), fb, pg[f], vg[f],
                        fb.type == BusType::Slack);
        write_bus_block(row.subspan(kBranchFeatureWidth + kBusFeatureWidth, kBusFeatureWidth), tb, pg[t], vg[t],
                        tb.type == BusType::Slack);
    }
    return x;
}

Tensor flows_to_tensor(std::vector<BranchFlow> const& flows) {
    Tensor y(flows.size(), kTargetWidth);
    for (std::size_t v = 0; v < flows.size(); ++v) {
        std::copy(flows[v].begin(), flows[v].end(), y.row(v).begin());
    }
    return y;
}

Tensor assemble_targets(Grid const& grid, PFSolution const& solution) {
    if (!solution.converged) throw Error(ErrorKind::UnconvergedLabel, "power flow for '" + grid.name + "' did not converge");
    auto flows = solution.flows;
    if (flows.size() != grid.n_in_service_branches()) flows = branch_flows(grid, solution.V);
    return flows_to_tensor(flows);
}

SparseMatrix normalize_adjacency(SparseMatrix const& adjacency, NormalizationMode mode) {
    if (!adjacency.is_symmetric()) throw Error(ErrorKind::AsymmetricInput, "adjacency must be symmetric");
    std::size_t const n = adjacency.rows;
    std::vector<SparseMatrix::Entry> entries;
    entries.reserve(adjacency.nnz() + n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = adjacency.row_offsets[i]; p < adjacency.row_offsets[i + 1]; ++p) {
            entries.push_back({i, adjacency.columns[p], adjacency.values[p]});
        }
        if (mode == NormalizationMode::SelfLoops) entries.push_back({i, i, 1.0});
    }
    SparseMatrix m = SparseMatrix::from_entries(n, n, std::move(entries));
    std::vector<double> inv_sqrt_degree(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double degree = 0.0;
        for (std::size_t p = m.row_offsets[i]; p < m.row_offsets[i + 1]; ++p) degree += m.values[p];
        inv_sqrt_degree[i] = degree > 0.0 ? 1.0 / std::sqrt(degree) : 0.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = m.row_offsets[i]; p < m.row_offsets[i + 1]; ++p) {
            m.values[p] *= inv_sqrt_degree[i] * inv_sqrt_degree[m.columns[p]];
        }
    }
    return m;
}

LineGraphSample make_sample(Grid const& grid, PFSolution const* solution, Grid const& reference,
                            std::vector<std::size_t> const& branch_origin) {
    auto lg = build_line_graph(grid);
    LineGraphSample s;
    s.grid_name = reference.name;
    s.features = assemble_features(grid);
    if (solution != nullptr) s.targets = assemble_targets(grid, *solution);
    s.adjacency = std::move(lg.adjacency);
    auto const slack = grid.slack_index();
    s.slack_angle = slack == Grid::npos ? 0.0 : grid.buses[slack].Va;
    s.branch_slots.reserve(lg.branch_of_vertex.size());
    s.bus_slots.reserve(lg.branch_of_vertex.size());
    for (auto k : lg.branch_of_vertex) {
        if (!branch_origin.empty() && k >= branch_origin.size()) {
            throw Error(ErrorKind::DimensionMismatch, "branch origin map shorter than branch list");
        }
        s.branch_slots.push_back(branch_origin.empty() ? k : branch_origin[k]);
        auto const& br = grid.branches[k];
        s.bus_slots.push_back({reference.index_of(br.from_bus), reference.index_of(br.to_bus)});
    }
    return s;
}

Grid grid_from_sample(LineGraphSample const& sample) {
    struct BusInfo {
        std::span<double const> block;
    };
    std::map<std::size_t, BusInfo> buses;
    for (std::size_t v = 0; v < sample.n_vertices(); ++v) {
        auto row = sample.features.row(v);
        buses.try_emplace(sample.bus_slots[v][0], BusInfo{row.subspan(kBranchFeatureWidth, kBusFeatureWidth)});
        buses.try_emplace(sample.bus_slots[v][1],
                          BusInfo{row.subspan(kBranchFeatureWidth + kBusFeatureWidth, kBusFeatureWidth)});
    }

    Grid grid;
    grid.name = sample.grid_name;
    grid.baseMVA = 100.0;
    for (auto const& [slot, info] : buses) {
        auto const& blk = info.block;
        int const id = static_cast<int>(slot) + 1;
        bool const slack = blk[7] > 0.5;
        bool const has_gen = blk[5] > 0.0;
        grid.buses.push_back(Bus{
            .id = id,
            .type = slack ? BusType::Slack : (has_gen ? BusType::PV : BusType::PQ),
            .Pd = blk[0],
            .Qd = blk[1],
            .Gs = blk[2],
            .Bs = blk[3],
            .Vm = has_gen ? blk[5] : 1.0,
            .Va = slack ? sample.slack_angle : 0.0,
        });
        if (has_gen) {
            grid.generators.push_back(Generator{
                .bus_id = id, .Pg = blk[4], .Pmax = blk[4], .Pmin = blk[4], .Vg = blk[5]});
        }
    }
    for (std::size_t v = 0; v < sample.n_vertices(); ++v) {
        auto row = sample.features.row(v);
        grid.branches.push_back(Branch{
            .from_bus = static_cast<int>(sample.bus_slots[v][0]) + 1,
            .to_bus = static_cast<int>(sample.bus_slots[v][1]) + 1,
            .r = row[0],
            .x = row[1],
            .b = row[2],
            .tau = row[3],
            .shift = row[4],
        });
    }
    grid.reindex();
    return grid;
}

std::vector<std::array<std::size_t, 2>> edge_list(SparseMatrix const& adjacency) {
    std::vector<std::array<std::size_t, 2>> edges;
    for (std::size_t i = 0; i < adjacency.rows; ++i) {
        for (std::size_t p = adjacency.row_offsets[i]; p < adjacency.row_offsets[i + 1]; ++p) {
            if (adjacency.columns[p] > i) edges.push_back({i, adjacency.columns[p]});
        }
    }
    return edges;
}

SparseMatrix adjacency_from_edges(std::size_t n, std::vector<std::array<std::size_t, 2>> const& edges) {
    std::vector<SparseMatrix::Entry> entries;
    entries.reserve(2 * edges.size());
    for (auto const& [i, j] : edges) {
        if (i >= n || j >= n) throw Error(ErrorKind::SchemaError, "edge endpoint out of range");
        entries.push_back({i, j, 1.0});
        entries.push_back({j, i, 1.0});
    }
    auto a = SparseMatrix::from_entries(n, n, std::move(entries));
    for (auto& v : a.values) v = 1.0;
    return a;
}

}  // namespace gridflow
