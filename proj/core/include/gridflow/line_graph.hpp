#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "gridflow/grid.hpp"
#include "gridflow/tensor.hpp"

namespace gridflow {

inline constexpr std::size_t kBranchFeatureWidth = 5;
inline constexpr std::size_t kBusFeatureWidth = 8;
inline constexpr std::size_t kFeatureWidth = kBranchFeatureWidth + 2 * kBusFeatureWidth;  // 21
inline constexpr std::size_t kTargetWidth = 8;

/// Undirected line graph over the in-service branches, in grid order.
struct LineGraph {
    SparseMatrix adjacency;                     // binary, symmetric, zero diagonal
    std::vector<std::size_t> branch_of_vertex;  // vertex -> position in grid.branches
};

LineGraph build_line_graph(Grid const& grid);

/// One row per in-service branch:
///   [r, x, b, tau, shift | from-bus block | to-bus block]
/// with each bus block [Pd, Qd, Gs, Bs, Pg, |Vg|, non_slack, slack].
Tensor assemble_features(Grid const& grid);

/// One row per in-service branch in the flow-record layout. Throws
/// Error(UnconvergedLabel) when the solution did not converge.
Tensor assemble_targets(Grid const& grid, PFSolution const& solution);

Tensor flows_to_tensor(std::vector<BranchFlow> const& flows);

enum class NormalizationMode {
    SelfLoops,  // D^-1/2 (A + I) D^-1/2 with D the degree of A + I
    Plain,      // D^-1/2 A D^-1/2, zero rows for isolated vertices
};

/// Throws Error(AsymmetricInput) for a non-symmetric input.
SparseMatrix normalize_adjacency(SparseMatrix const& adjacency, NormalizationMode mode);

/// A learning sample on the line graph. Slots locate each vertex and its
/// endpoint buses in the reference (unperturbed) grid the sample came from,
/// which is what a fixed-layout model keys its input units on.
struct LineGraphSample {
    std::string grid_name;
    SparseMatrix adjacency;
    Tensor features;                // n x 21
    std::optional<Tensor> targets;  // n x 8
    std::vector<std::size_t> branch_slots;
    std::vector<std::array<std::size_t, 2>> bus_slots;  // (from, to)
    double slack_angle = 0.0;  // reference angle; the current targets depend on it

    std::size_t n_vertices() const { return features.rows; }
    friend bool operator==(LineGraphSample const&, LineGraphSample const&) = default;
};

/// Builds a sample from a grid whose buses/branches are positioned as in the
/// reference grid: bus slots come from `reference` by bus id and branch slots
/// from `branch_origin` (identity when empty).
LineGraphSample make_sample(Grid const& grid, PFSolution const* solution, Grid const& reference,
                            std::vector<std::size_t> const& branch_origin = {});

/// Rebuilds a per-unit grid equivalent to the one a sample was assembled from
/// (bus ids are slot + 1). Flow-relevant data round-trips exactly.
Grid grid_from_sample(LineGraphSample const& sample);

/// Upper-triangle edge list (i < j) of a binary adjacency.
std::vector<std::array<std::size_t, 2>> edge_list(SparseMatrix const& adjacency);
SparseMatrix adjacency_from_edges(std::size_t n, std::vector<std::array<std::size_t, 2>> const& edges);

}  // namespace gridflow
