#include "gridflow/sampler.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <queue>
#include <sstream>
#include <thread>

#include "gridflow/case_io.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kDatasetVersion = 1;

double scaled(double ref, Interval const& iv, Rng& rng) {
    // draw the multiplier so a negative reference still maps into [lo, hi] x ref
    return ref * rng.uniform(iv.lo, iv.hi);
}

ordered_json interval_json(Interval const& iv) { return ordered_json::array({iv.lo, iv.hi}); }

std::vector<std::size_t> split_sizes(std::size_t n, SplitRatios const& r) {
    auto const train = static_cast<std::size_t>(std::llround(r.train * static_cast<double>(n)));
    auto const val = static_cast<std::size_t>(std::llround(r.val * static_cast<double>(n)));
    std::size_t const t = std::min(train, n);
    std::size_t const v = std::min(val, n - t);
    return {t, v, n - t - v};
}

LineGraphSample produce_sample(Grid const& reference, SamplerConfig const& config, std::uint64_t index) {
    Rng rng = Rng::stream(config.seed, index);
    std::vector<std::size_t> identity_origin;
    for (int attempt = 0; attempt < config.retry_budget; ++attempt) {
        Grid grid;
        std::vector<std::size_t> const* origin = &identity_origin;
        std::optional<Perturbation> perturbed;
        if (config.perturb) {
            perturbed = perturb_topology(reference, rng, config.perturbation);
            if (!perturbed) continue;
            grid = sample_values(perturbed->grid, rng, config.ranges);
            origin = &perturbed->branch_origin;
        } else {
            grid = sample_values(reference, rng, config.ranges);
        }
        auto const sol = solve_nr(grid, config.nr);
        if (!sol.converged || sol.slack_P < 0.0) continue;
        return make_sample(grid, &sol, reference, *origin);
    }
    throw Error(ErrorKind::RetryBudgetExhausted, "sample " + std::to_string(index) + " of '" + reference.name +
                                                     "' failed " + std::to_string(config.retry_budget) + " times");
}

ordered_json sample_to_json(LineGraphSample const& s, Split split) {
    ordered_json j;
    j["grid_name"] = s.grid_name;
    j["split"] = to_string(split);
    j["n_vertices"] = s.n_vertices();
    j["slack_angle"] = s.slack_angle;
    auto& edges = j["edges"] = ordered_json::array();
    for (auto const& [a, b] : edge_list(s.adjacency)) edges.push_back({a, b});
    auto rows = [](Tensor const& t) {
        ordered_json out = ordered_json::array();
        for (std::size_t i = 0; i < t.rows; ++i) {
            auto r = t.row(i);
            out.push_back(std::vector<double>(r.begin(), r.end()));
        }
        return out;
    };
    j["features"] = rows(s.features);
    if (s.targets) j["targets"] = rows(*s.targets);
    j["branch_slots"] = s.branch_slots;
    auto& bus_slots = j["bus_slots"] = ordered_json::array();
    for (auto const& [f, t] : s.bus_slots) bus_slots.push_back({f, t});
    return j;
}

Tensor rows_from_json(ordered_json const& arr, std::size_t n, std::size_t width, std::string const& path) {
    if (!arr.is_array() || arr.size() != n) throw Error(ErrorKind::SchemaError, path + " must hold n_vertices rows");
    Tensor t(n, width);
    for (std::size_t i = 0; i < n; ++i) {
        auto const& row = arr[i];
        if (!row.is_array() || row.size() != width) {
            throw Error(ErrorKind::SchemaError, path + "[" + std::to_string(i) + "] must hold " +
                                                    std::to_string(width) + " numbers");
        }
        for (std::size_t j = 0; j < width; ++j) {
            if (!row[j].is_number()) throw Error(ErrorKind::SchemaError, path + " holds a non-number");
            t(i, j) = row[j].get<double>();
        }
    }
    return t;
}

LineGraphSample sample_from_json(ordered_json const& j, Split& split, std::size_t line) {
    std::string const at = "line " + std::to_string(line) + ": $";
    try {
        LineGraphSample s;
        s.grid_name = j.at("grid_name").get<std::string>();
        split = parse_split(j.at("split").get<std::string>());
        auto const n = j.at("n_vertices").get<std::size_t>();
        s.slack_angle = j.value("slack_angle", 0.0);
        std::vector<std::array<std::size_t, 2>> edges;
        for (auto const& e : j.at("edges")) edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
        s.adjacency = adjacency_from_edges(n, edges);
        s.features = rows_from_json(j.at("features"), n, kFeatureWidth, at + ".features");
        if (j.contains("targets")) s.targets = rows_from_json(j["targets"], n, kTargetWidth, at + ".targets");
        s.branch_slots = j.at("branch_slots").get<std::vector<std::size_t>>();
        for (auto const& e : j.at("bus_slots")) s.bus_slots.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
        if (s.branch_slots.size() != n || s.bus_slots.size() != n) {
            throw Error(ErrorKind::SchemaError, at + ": slot arrays must hold n_vertices entries");
        }
        return s;
    } catch (nlohmann::json::exception const& e) {
        throw Error(ErrorKind::SchemaError, at + ": " + e.what());
    }
}

}  // namespace

void SamplerConfig::check() const {
    double const sum = split.train + split.val + split.test;
    if (std::abs(sum - 1.0) > 1e-9 || split.train < 0 || split.val < 0 || split.test < 0) {
        throw Error(ErrorKind::InvalidArgument, "split ratios must be non-negative and sum to 1");
    }
    if (n_samples == 0) throw Error(ErrorKind::InvalidArgument, "n_samples must be positive");
    if (retry_budget < 1) throw Error(ErrorKind::InvalidArgument, "retry budget must be positive");
    if (perturbation.min_disconnect < 0 || perturbation.max_disconnect < perturbation.min_disconnect) {
        throw Error(ErrorKind::InvalidArgument, "invalid disconnection range");
    }
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw Error(ErrorKind::SchemaError, "split must be train|val|test, got '" + std::string(text) + "'");
}

SplitCounts Dataset::split_counts() const {
    SplitCounts c;
    for (auto s : splits) {
        if (s == Split::Train) ++c.train;
        if (s == Split::Val) ++c.val;
        if (s == Split::Test) ++c.test;
    }
    return c;
}

std::vector<LineGraphSample const*> Dataset::select(Split split) const {
    std::vector<LineGraphSample const*> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (splits[i] == split) out.push_back(&samples[i]);
    }
    return out;
}

std::size_t Dataset::max_buses() const {
    std::size_t m = 0;
    for (auto const& g : grids) m = std::max(m, g.n_buses);
    return m;
}

std::size_t Dataset::max_branches() const {
    std::size_t m = 0;
    for (auto const& g : grids) m = std::max(m, g.n_branches);
    return m;
}

Grid sample_values(Grid const& reference, Rng& rng, SamplingRanges const& ranges) {
    Grid g = reference;
    for (auto& bus : g.buses) {
        bus.Pd = scaled(bus.Pd, ranges.load, rng);
        bus.Qd = scaled(bus.Qd, ranges.load, rng);
        bus.Gs = scaled(bus.Gs, ranges.shunt, rng);
        bus.Bs = scaled(bus.Bs, ranges.shunt, rng);
    }
    for (auto& gen : g.generators) {
        double lo = ranges.gen_p.lo * gen.Pg;
        double hi = ranges.gen_p.hi * gen.Pg;
        if (lo > hi) std::swap(lo, hi);
        hi = std::min(hi, gen.Pmax);
        gen.Pg = hi > lo ? rng.uniform(lo, hi) : (rng.canonical(), std::min(lo, gen.Pmax));
        gen.Vg = rng.uniform(ranges.gen_v.lo, ranges.gen_v.hi);
    }
    for (auto& br : g.branches) {
        br.r = scaled(br.r, ranges.branch, rng);
        br.x = scaled(br.x, ranges.branch, rng);
        br.b = scaled(br.b, ranges.branch, rng);
        if (br.is_transformer()) {
            br.tau = rng.uniform(ranges.tau.lo, ranges.tau.hi);
            br.shift = rng.uniform(ranges.shift.lo, ranges.shift.hi);
        }
    }
    return g;
}

std::optional<Perturbation> perturb_topology(Grid const& reference, Rng& rng, PerturbationOptions const& options) {
    std::size_t const slack = reference.slack_index();
    if (slack == Grid::npos) throw Error(ErrorKind::NoSlack, "grid '" + reference.name + "' has no slack bus");
    int const slack_id = reference.buses[slack].id;

    std::vector<std::size_t> eligible;
    for (std::size_t k = 0; k < reference.branches.size(); ++k) {
        auto const& br = reference.branches[k];
        if (br.in_service && br.from_bus != slack_id && br.to_bus != slack_id) eligible.push_back(k);
    }
    auto const k_draw = static_cast<std::size_t>(rng.uniform_int(options.min_disconnect, options.max_disconnect));
    std::size_t const k = std::min(k_draw, eligible.size());
    // partial Fisher-Yates: the first k entries are the disconnected branches
    for (std::size_t i = 0; i < k; ++i) {
        auto const j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                                static_cast<std::int64_t>(eligible.size() - 1)));
        std::swap(eligible[i], eligible[j]);
    }
    std::vector<bool> disconnected(reference.branches.size(), false);
    for (std::size_t i = 0; i < k; ++i) disconnected[eligible[i]] = true;

    std::size_t const n = reference.n_buses();
    std::vector<std::vector<std::size_t>> neighbours(n);
    for (std::size_t b = 0; b < reference.branches.size(); ++b) {
        auto const& br = reference.branches[b];
        if (!br.in_service || disconnected[b]) continue;
        auto const f = reference.index_of(br.from_bus);
        auto const t = reference.index_of(br.to_bus);
        neighbours[f].push_back(t);
        neighbours[t].push_back(f);
    }
    std::vector<bool> keep(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(slack);
    keep[slack] = true;
    std::size_t n_kept = 1;
    while (!frontier.empty()) {
        auto const u = frontier.front();
        frontier.pop();
        for (auto v : neighbours[u]) {
            if (!keep[v]) {
                keep[v] = true;
                ++n_kept;
                frontier.push(v);
            }
        }
    }
    if (static_cast<double>(n_kept) < options.min_bus_fraction * static_cast<double>(n)) return std::nullopt;

    Perturbation out;
    out.requested = k;
    Grid& g = out.grid;
    g.name = reference.name;
    g.baseMVA = reference.baseMVA;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) g.buses.push_back(reference.buses[i]);
    }
    for (auto const& gen : reference.generators) {
        if (keep[reference.index_of(gen.bus_id)]) g.generators.push_back(gen);
    }
    for (std::size_t b = 0; b < reference.branches.size(); ++b) {
        auto const& br = reference.branches[b];
        if (!br.in_service || disconnected[b]) continue;
        if (!keep[reference.index_of(br.from_bus)]) continue;  // both ends share a component
        g.branches.push_back(br);
        out.branch_origin.push_back(b);
    }
    out.removed = reference.n_in_service_branches() - g.branches.size();
    g.reindex();
    return out;
}

Grid toy_grid() {
    Grid g;
    g.name = "toy4";
    g.baseMVA = 100.0;
    g.buses = {
        Bus{.id = 1, .type = BusType::Slack, .Vm = 1.02, .base_kV = 110.0},
        Bus{.id = 2, .type = BusType::PV, .Pd = 0.2, .Qd = 0.1, .Vm = 1.01, .base_kV = 110.0},
        Bus{.id = 3, .type = BusType::PQ, .Pd = 0.9, .Qd = 0.3, .Bs = 0.05, .base_kV = 110.0},
        Bus{.id = 4, .type = BusType::PQ, .Pd = 0.6, .Qd = 0.2, .Gs = 0.01, .base_kV = 110.0},
    };
    g.generators = {
        Generator{.bus_id = 1, .Pg = 0.8, .Qmax = 3.0, .Qmin = -3.0, .Pmax = 3.0, .Vg = 1.02},
        Generator{.bus_id = 2, .Pg = 0.7, .Qmax = 2.0, .Qmin = -2.0, .Pmax = 1.5, .Vg = 1.01},
    };
    g.branches = {
        Branch{.from_bus = 1, .to_bus = 2, .r = 0.01, .x = 0.08, .b = 0.02},
        Branch{.from_bus = 1, .to_bus = 3, .r = 0.02, .x = 0.10, .b = 0.03},
        Branch{.from_bus = 2, .to_bus = 3, .r = 0.015, .x = 0.09, .b = 0.02},
        Branch{.from_bus = 2, .to_bus = 4, .r = 0.01, .x = 0.07, .b = 0.01},
        Branch{.from_bus = 3, .to_bus = 4, .r = 0.005, .x = 0.06, .tau = 0.98, .shift = 0.05},
    };
    g.reindex();
    return g;
}

unsigned default_thread_count() {
    if (char const* env = std::getenv("GRIDFLOW_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::string config_to_json(SamplerConfig const& c) {
    ordered_json j;
    j["n_samples"] = c.n_samples;
    j["perturb"] = c.perturb;
    j["ranges"] = {{"load", interval_json(c.ranges.load)},     {"shunt", interval_json(c.ranges.shunt)},
                   {"gen_p", interval_json(c.ranges.gen_p)},   {"gen_v", interval_json(c.ranges.gen_v)},
                   {"branch", interval_json(c.ranges.branch)}, {"tau", interval_json(c.ranges.tau)},
                   {"shift", interval_json(c.ranges.shift)}};
    j["perturbation"] = {{"min_disconnect", c.perturbation.min_disconnect},
                         {"max_disconnect", c.perturbation.max_disconnect},
                         {"min_bus_fraction", c.perturbation.min_bus_fraction}};
    j["split"] = {c.split.train, c.split.val, c.split.test};
    j["retry_budget"] = c.retry_budget;
    j["nr"] = {{"tolerance", c.nr.tolerance},
               {"max_iterations", c.nr.max_iterations},
               {"init", c.nr.init == VoltageInit::FlatStart ? "flat" : "case"}};
    return j.dump();
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Dataset generate_dataset(std::span<Grid const> grids, SamplerConfig const& config) {
    config.check();
    if (grids.empty()) throw Error(ErrorKind::InvalidArgument, "no grids given");
    for (auto const& g : grids) validate_or_throw(g);

    std::size_t const per_grid = config.n_samples;
    std::size_t const total = per_grid * grids.size();
    std::vector<LineGraphSample> samples(total);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::size_t failure_index = total;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            std::size_t const i = next.fetch_add(1);
            if (i >= total) return;
            try {
                samples[i] = produce_sample(grids[i / per_grid], config, i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (i < failure_index) {
                    failure_index = i;
                    failure = std::current_exception();
                }
                next.store(total);
                return;
            }
        }
    };
    unsigned const threads = std::max(1u, std::min<unsigned>(config.threads ? config.threads : default_thread_count(),
                                                              static_cast<unsigned>(total)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    Dataset ds;
    ds.samples = std::move(samples);
    ds.splits.resize(total);
    ds.seed = config.seed;
    ds.config_json = config_to_json(config);
    ds.config_hash = fnv1a_hex(ds.config_json);
    for (std::size_t g = 0; g < grids.size(); ++g) {
        ds.grids.push_back({grids[g].name, grids[g].n_buses(), grids[g].branches.size()});
        std::vector<std::size_t> order(per_grid);
        std::iota(order.begin(), order.end(), 0);
        Rng rng = Rng::stream(config.seed ^ 0x5a5a5a5a5a5a5a5aULL, g);
        for (std::size_t i = per_grid; i > 1; --i) {
            auto const j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
            std::swap(order[i - 1], order[j]);
        }
        auto const sizes = split_sizes(per_grid, config.split);
        for (std::size_t r = 0; r < per_grid; ++r) {
            Split const s = r < sizes[0] ? Split::Train : (r < sizes[0] + sizes[1] ? Split::Val : Split::Test);
            ds.splits[g * per_grid + order[r]] = s;
        }
    }
    return ds;
}

std::string dataset_to_jsonl(Dataset const& ds) {
    ordered_json header;
    header["version"] = kDatasetVersion;
    auto& grids = header["grids"] = ordered_json::array();
    for (auto const& g : ds.grids) {
        grids.push_back({{"name", g.name}, {"n_buses", g.n_buses}, {"n_branches", g.n_branches}});
    }
    header["seed"] = ds.seed;
    header["config"] = ds.config_json.empty() ? ordered_json::object() : ordered_json::parse(ds.config_json);
    header["config_hash"] = ds.config_hash;
    auto const counts = ds.split_counts();
    header["split_counts"] = {{"train", counts.train}, {"val", counts.val}, {"test", counts.test}};

    std::string out = header.dump();
    out += '\n';
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        out += sample_to_json(ds.samples[i], ds.splits[i]).dump();
        out += '\n';
    }
    return out;
}

Dataset dataset_from_jsonl(std::string_view text) {
    Dataset ds;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line.begin(), line.end());
        } catch (nlohmann::json::parse_error const& e) {
            throw Error(ErrorKind::SchemaError, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!have_header) {
            try {
                if (j.at("version").get<int>() != kDatasetVersion) {
                    throw Error(ErrorKind::VersionMismatch, "unsupported dataset version");
                }
                for (auto const& g : j.at("grids")) {
                    ds.grids.push_back({g.at("name").get<std::string>(), g.at("n_buses").get<std::size_t>(),
                                        g.at("n_branches").get<std::size_t>()});
                }
                ds.seed = j.at("seed").get<std::uint64_t>();
                ds.config_json = j.at("config").dump();
                ds.config_hash = j.value("config_hash", "");
            } catch (nlohmann::json::exception const& e) {
                throw Error(ErrorKind::SchemaError, std::string("header: ") + e.what());
            }
            have_header = true;
            continue;
        }
        Split split{};
        ds.samples.push_back(sample_from_json(j, split, line_no));
        ds.splits.push_back(split);
    }
    if (!have_header) throw Error(ErrorKind::SchemaError, "dataset has no header line");
    return ds;
}

void write_dataset(Dataset const& dataset, std::filesystem::path const& path) {
    write_text_file_atomic(path, dataset_to_jsonl(dataset));
}

Dataset read_dataset(std::filesystem::path const& path) { return dataset_from_jsonl(read_text_file(path)); }

}  // namespace gridflow
