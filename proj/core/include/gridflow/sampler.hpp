#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridflow/ac_solver.hpp"
#include "gridflow/grid.hpp"
#include "gridflow/line_graph.hpp"
#include "gridflow/random.hpp"

namespace gridflow {

struct Interval {
    double lo;
    double hi;
    friend bool operator==(Interval const&, Interval const&) = default;
};

/// Resampling intervals. Multipliers scale the reference value; the
/// generator voltage, tap ratio and phase shift intervals are absolute.
struct SamplingRanges {
    Interval load{0.5, 1.5};
    Interval shunt{0.75, 1.25};
    Interval gen_p{0.75, 1.25};  // upper end further capped at Pmax
    Interval gen_v{0.95, 1.05};
    Interval branch{0.9, 1.1};
    Interval tau{0.8, 1.2};
    Interval shift{-0.2, 0.2};
    friend bool operator==(SamplingRanges const&, SamplingRanges const&) = default;
};

struct PerturbationOptions {
    int min_disconnect = 5;
    int max_disconnect = 20;
    double min_bus_fraction = 0.1;
    friend bool operator==(PerturbationOptions const&, PerturbationOptions const&) = default;
};

struct SplitRatios {
    double train = 0.56;
    double val = 0.14;
    double test = 0.30;
    friend bool operator==(SplitRatios const&, SplitRatios const&) = default;
};

struct SamplerConfig {
    std::uint64_t seed = 0;
    std::size_t n_samples = 100;  // per grid
    bool perturb = false;
    SamplingRanges ranges;
    PerturbationOptions perturbation;
    SplitRatios split;
    int retry_budget = 1000;
    NROptions nr;
    unsigned threads = 0;  // 0: GRIDFLOW_THREADS or all cores

    void check() const;
};

enum class Split { Train, Val, Test };
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct GridInfo {
    std::string name;
    std::size_t n_buses = 0;
    std::size_t n_branches = 0;
    friend bool operator==(GridInfo const&, GridInfo const&) = default;
};

struct SplitCounts {
    std::size_t train = 0, val = 0, test = 0;
    friend bool operator==(SplitCounts const&, SplitCounts const&) = default;
};

struct Dataset {
    std::vector<LineGraphSample> samples;
    std::vector<Split> splits;
    std::vector<GridInfo> grids;
    std::uint64_t seed = 0;
    std::string config_json;  // canonical serialized SamplerConfig
    std::string config_hash;

    SplitCounts split_counts() const;
    std::vector<LineGraphSample const*> select(Split split) const;
    /// Largest bus / branch counts over the source grids.
    std::size_t max_buses() const;
    std::size_t max_branches() const;
};

/// Independent uniform redraw of loads, shunts, generator outputs and
/// setpoints, branch impedances, and (transformers only) taps and shifts.
Grid sample_values(Grid const& reference, Rng& rng, SamplingRanges const& ranges = {});

struct Perturbation {
    Grid grid;
    std::vector<std::size_t> branch_origin;  // branch -> position in the reference grid
    std::size_t requested = 0;               // branches chosen for disconnection
    std::size_t removed = 0;                 // branches removed in total (incl. islanded parts)
};

/// Disconnects k in [min, max] random branches not incident to the slack and
/// keeps only the slack's connected component. nullopt means the result kept
/// fewer than `min_bus_fraction` of the buses and was rejected.
std::optional<Perturbation> perturb_topology(Grid const& reference, Rng& rng,
                                             PerturbationOptions const& options = {});

/// Four-bus, five-branch meshed grid (slack, PV, two PQ buses, one phase-
/// shifting transformer) for smoke tests and gradient checks.
Grid toy_grid();

/// Number of generator threads: GRIDFLOW_THREADS if set, else all cores.
unsigned default_thread_count();

/// Draws n_samples labeled samples per grid. Sample i uses the RNG stream
/// (seed, i) so content does not depend on the thread count. Throws
/// Error(RetryBudgetExhausted) when a sample cannot be produced.
Dataset generate_dataset(std::span<Grid const> grids, SamplerConfig const& config);

std::string config_to_json(SamplerConfig const& config);
std::string fnv1a_hex(std::string_view text);

/// JSONL: a header line followed by one line per sample.
void write_dataset(Dataset const& dataset, std::filesystem::path const& path);
Dataset read_dataset(std::filesystem::path const& path);
std::string dataset_to_jsonl(Dataset const& dataset);
Dataset dataset_from_jsonl(std::string_view text);

}  // namespace gridflow
