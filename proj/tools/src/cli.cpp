#include "gridflow/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gridflow/ac_solver.hpp"
#include "gridflow/case_io.hpp"
#include "gridflow/checkpoint.hpp"
#include "gridflow/dc_solver.hpp"
#include "gridflow/error.hpp"
#include "gridflow/metrics.hpp"
#include "gridflow/models.hpp"
#include "gridflow/sampler.hpp"
#include "gridflow/training.hpp"

#ifndef GRIDFLOW_VERSION_STRING
#define GRIDFLOW_VERSION_STRING "0.0.0"
#endif
#ifndef GRIDFLOW_CASES_DIR
#define GRIDFLOW_CASES_DIR ""
#endif

namespace gridflow {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string format_double(double d) {
    std::ostringstream ss;
    ss << std::setprecision(17) << d;
    return ss.str();
}

std::string utc_timestamp() {
    std::time_t const now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

/// A path on disk, or the name of a bundled case ("case30").
fs::path resolve_case(std::string const& spec) {
    fs::path const p(spec);
    if (fs::exists(p)) return p;
    std::vector<fs::path> dirs;
    if (char const* env = std::getenv("GRIDFLOW_CASES_DIR")) dirs.emplace_back(env);
    dirs.emplace_back(GRIDFLOW_CASES_DIR);
    for (auto const& d : dirs) {
        if (d.empty()) continue;
        for (auto const* ext : {".json", ".m"}) {
            fs::path const candidate = d / (spec + ext);
            if (fs::exists(candidate)) return candidate;
        }
    }
    throw Error(ErrorKind::IoError, "no case file or bundled case named '" + spec + "'");
}

Grid load_grid(std::string const& spec, std::ostream& err) {
    auto doc = load_case(resolve_case(spec));
    for (auto const& w : doc.warnings) err << "warning: " << w << '\n';
    return std::move(doc.grid);
}

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    Clock::time_point started = Clock::now();
    std::string started_at = utc_timestamp();

    void write_next_to(fs::path const& artifact) const {
        ordered_json j;
        j["command"] = command;
        j["argv"] = argv;
        j["config_hash"] = config_hash;
        j["seed"] = seed;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["started_at"] = started_at;
        j["wall_clock_s"] = std::chrono::duration<double>(Clock::now() - started).count();
        j["tool_version"] = GRIDFLOW_VERSION_STRING;
        fs::path m = artifact;
        m += ".manifest.json";
        write_text_file_atomic(m, j.dump(2) + "\n");
    }
};

void write_voltage_table(std::ostream& out, Grid const& grid, std::vector<double> const& vm,
                         std::vector<double> const& va) {
    out << "bus,Vm,Va\n";
    for (std::size_t i = 0; i < grid.n_buses(); ++i) {
        out << grid.buses[i].id << ',' << format_double(vm[i]) << ',' << format_double(va[i]) << '\n';
    }
}

void write_flow_table(std::ostream& out, Grid const& grid, std::vector<BranchFlow> const& flows) {
    out << "branch,from,to,Pf,Qf,If_re,If_im,Pt,Qt,It_re,It_im\n";
    std::size_t v = 0;
    for (std::size_t k = 0; k < grid.branches.size(); ++k) {
        auto const& br = grid.branches[k];
        if (!br.in_service) continue;
        out << k << ',' << br.from_bus << ',' << br.to_bus;
        for (double x : flows[v]) out << ',' << format_double(x);
        out << '\n';
        ++v;
    }
}

std::vector<LineGraphSample const*> samples_of(Dataset const& ds, std::string const& split) {
    if (split == "all") {
        std::vector<LineGraphSample const*> all;
        for (auto const& s : ds.samples) all.push_back(&s);
        return all;
    }
    auto out = ds.select(parse_split(split));
    if (out.empty()) throw Error(ErrorKind::EmptySplit, "dataset has no '" + split + "' samples");
    return out;
}

Tensor target_rows(std::vector<LineGraphSample const*> const& samples) {
    std::vector<Tensor> parts;
    for (auto const* s : samples) {
        if (!s->targets) throw Error(ErrorKind::InvalidArgument, "samples have no targets");
        parts.push_back(*s->targets);
    }
    return stack_rows(parts);
}

}  // namespace

int cli_main(int argc, char const* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Power flow solvers and graph neural network surrogates on the line graph", "gridflow"};
    app.require_subcommand(1);
    app.set_version_flag("--version", GRIDFLOW_VERSION_STRING);

    RunManifest manifest;
    for (int i = 0; i < argc; ++i) manifest.argv.emplace_back(argv[i]);

    // solve-ac
    std::string ac_case;
    double ac_tol = 1e-8;
    int ac_max_iter = 30;
    bool ac_flat = false;
    auto* solve_ac = app.add_subcommand("solve-ac", "Newton-Raphson AC power flow; prints voltages and flows as CSV");
    solve_ac->add_option("case", ac_case, "Case file (.m/.json) or bundled case name")->required();
    solve_ac->add_option("--tol", ac_tol, "Mismatch tolerance, p.u.")->check(CLI::PositiveNumber);
    solve_ac->add_option("--max-iter", ac_max_iter, "Iteration limit")->check(CLI::PositiveNumber);
    solve_ac->add_flag("--flat-start", ac_flat, "Start from |V| = 1, angle 0");

    // solve-dc
    std::string dc_case;
    auto* solve_dc_cmd = app.add_subcommand("solve-dc", "Linear DC power flow; prints angles and flows as CSV");
    solve_dc_cmd->add_option("case", dc_case, "Case file (.m/.json) or bundled case name")->required();

    // convert
    std::string convert_in, convert_out;
    auto* convert = app.add_subcommand("convert", "Convert a MATPOWER case to the JSON schema");
    convert->add_option("input", convert_in, "Input case")->required();
    convert->add_option("output", convert_out, "Output .json")->required();

    // make-dataset
    std::vector<std::string> ds_cases;
    std::string ds_case_list;
    std::size_t ds_n = 100;
    std::uint64_t ds_seed = 0;
    bool ds_perturb = false;
    std::string ds_out;
    unsigned ds_threads = 0;
    int ds_retry = 1000;
    auto* make_ds = app.add_subcommand("make-dataset", "Generate labeled line-graph samples");
    make_ds->add_option("--case", ds_cases, "Case (repeatable)");
    make_ds->add_option("--cases", ds_case_list, "Comma-separated cases");
    make_ds->add_option("--n", ds_n, "Samples per grid")->check(CLI::PositiveNumber);
    make_ds->add_option("--seed", ds_seed, "Master seed");
    make_ds->add_flag("--perturb", ds_perturb, "Random branch disconnections");
    make_ds->add_option("--out", ds_out, "Output .jsonl")->required();
    make_ds->add_option("--threads", ds_threads, "Worker threads (default GRIDFLOW_THREADS or all cores)");
    make_ds->add_option("--retry-budget", ds_retry, "Attempts per sample")->check(CLI::PositiveNumber);

    // train
    std::string tr_dataset, tr_model = "arma", tr_out;
    int tr_epochs = 250;
    std::size_t tr_batch = 0;
    double tr_lr = 1e-3;
    std::uint64_t tr_seed = 0;
    bool tr_toy = false, tr_quiet = false;
    auto* train_cmd = app.add_subcommand("train", "Train a model; writes a checkpoint and its history");
    train_cmd->add_option("--dataset", tr_dataset, "Dataset .jsonl")->required();
    train_cmd->add_option("--model", tr_model, "arma|gcn|local-mlp|global-mlp");
    train_cmd->add_option("--epochs", tr_epochs, "Epochs")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--batch", tr_batch, "Batch size (default 16, or 32 for several grids)");
    train_cmd->add_option("--lr", tr_lr, "Adam learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", tr_seed, "Initialization and shuffling seed");
    train_cmd->add_option("--out", tr_out, "Checkpoint path")->required();
    train_cmd->add_flag("--toy", tr_toy, "Small layer widths");
    train_cmd->add_flag("--quiet", tr_quiet, "No per-epoch progress");

    // eval
    std::string ev_dataset, ev_checkpoint, ev_report, ev_json, ev_split = "test";
    bool ev_dc = false;
    auto* eval_cmd = app.add_subcommand("eval", "NRMSE of a checkpoint or of DC power flow");
    eval_cmd->add_option("--dataset", ev_dataset, "Dataset .jsonl")->required();
    auto* ev_ckpt_opt = eval_cmd->add_option("--checkpoint", ev_checkpoint, "Model checkpoint");
    auto* ev_dc_opt = eval_cmd->add_flag("--dc", ev_dc, "Score the DC power flow baseline");
    ev_ckpt_opt->excludes(ev_dc_opt);
    eval_cmd->add_option("--report", ev_report, "CSV report path (default stdout)");
    eval_cmd->add_option("--json", ev_json, "JSON report path");
    eval_cmd->add_option("--split", ev_split, "train|val|test|all");

    // gradcheck
    std::string gc_model = "arma";
    std::uint64_t gc_seed = 0;
    bool gc_full = false;
    std::size_t gc_entries = 0;
    double gc_tol = 1e-4;
    double gc_floor = 1e-8;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of model gradients on a toy sample");
    gradcheck->add_option("--model", gc_model, "arma|gcn|local-mlp|global-mlp");
    gradcheck->add_option("--seed", gc_seed, "Seed");
    gradcheck->add_flag("--full-size", gc_full, "Use the reference layer sizes instead of toy widths");
    gradcheck->add_option("--max-entries", gc_entries, "Entries per parameter (0 = all)");
    gradcheck->add_option("--tol", gc_tol, "Relative tolerance")->check(CLI::PositiveNumber);
    gradcheck->add_option("--floor", gc_floor, "Skip entries whose gradients are both below this magnitude")
        ->check(CLI::NonNegativeNumber);

    // smoothness
    std::string sm_dataset, sm_checkpoint, sm_out, sm_split = "test";
    auto* smooth = app.add_subcommand("smoothness", "Per-branch cosine distance to the mean label vector");
    smooth->add_option("--dataset", sm_dataset, "Dataset .jsonl")->required();
    smooth->add_option("--checkpoint", sm_checkpoint, "Model checkpoint")->required();
    smooth->add_option("--out", sm_out, "CSV output")->required();
    smooth->add_option("--split", sm_split, "train|val|test|all");

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        int const code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*solve_ac) {
            Grid const grid = load_grid(ac_case, err);
            NROptions opts;
            opts.tolerance = ac_tol;
            opts.max_iterations = ac_max_iter;
            opts.init = ac_flat ? VoltageInit::FlatStart : VoltageInit::CaseVoltages;
            auto const sol = solve_nr(grid, opts);
            if (!sol.converged) {
                err << "error: power flow did not converge after " << sol.iterations
                    << " iterations (max mismatch " << sol.max_mismatch << " p.u.)\n";
                return 1;
            }
            err << grid.name << ": converged in " << sol.iterations << " iterations, max mismatch "
                << sol.max_mismatch << " p.u.\n";
            write_voltage_table(out, grid, sol.Vm, sol.Va);
            out << '\n';
            write_flow_table(out, grid, sol.flows);
        } else if (*solve_dc_cmd) {
            Grid const grid = load_grid(dc_case, err);
            auto const dc = solve_dc(grid);
            out << "bus,theta\n";
            for (std::size_t i = 0; i < grid.n_buses(); ++i) {
                out << grid.buses[i].id << ',' << format_double(dc.theta[i]) << '\n';
            }
            out << '\n';
            out << "branch,from,to,Pf\n";
            std::size_t v = 0;
            for (std::size_t k = 0; k < grid.branches.size(); ++k) {
                auto const& br = grid.branches[k];
                if (!br.in_service) continue;
                out << k << ',' << br.from_bus << ',' << br.to_bus << ',' << format_double(dc.flows[v++][0]) << '\n';
            }
        } else if (*convert) {
            Grid const grid = load_grid(convert_in, err);
            for (auto const& v : validate(grid)) err << "warning: " << to_string(v.kind) << ": " << v.detail << '\n';
            write_text_file_atomic(convert_out, write_json(grid));
            manifest.command = "convert";
            manifest.inputs = {convert_in};
            manifest.outputs = {convert_out};
            manifest.write_next_to(convert_out);
        } else if (*make_ds) {
            if (!ds_case_list.empty()) {
                std::stringstream ss(ds_case_list);
                for (std::string item; std::getline(ss, item, ',');) {
                    if (!item.empty()) ds_cases.push_back(item);
                }
            }
            if (ds_cases.empty()) {
                err << "error: make-dataset needs --case or --cases\n";
                return 2;
            }
            std::vector<Grid> grids;
            for (auto const& c : ds_cases) grids.push_back(load_grid(c, err));
            SamplerConfig config;
            config.seed = ds_seed;
            config.n_samples = ds_n;
            config.perturb = ds_perturb;
            config.threads = ds_threads;
            config.retry_budget = ds_retry;
            Dataset const ds = generate_dataset(grids, config);
            write_dataset(ds, ds_out);
            auto const counts = ds.split_counts();
            err << "wrote " << ds.samples.size() << " samples (" << counts.train << " train, " << counts.val
                << " val, " << counts.test << " test) to " << ds_out << '\n';
            manifest.command = "make-dataset";
            manifest.config_hash = ds.config_hash;
            manifest.seed = ds_seed;
            manifest.inputs = ds_cases;
            manifest.outputs = {ds_out};
            manifest.write_next_to(ds_out);
        } else if (*train_cmd) {
            Dataset const ds = read_dataset(tr_dataset);
            ModelKind const kind = parse_model_kind(tr_model);
            ModelConfig config = tr_toy ? toy_config(kind) : ModelConfig::defaults(kind);
            if (kind == ModelKind::GlobalMlp) {
                config.max_buses = ds.max_buses();
                config.max_branches = ds.max_branches();
            }
            auto model = make_model(config, tr_seed);
            TrainOptions opts;
            opts.epochs = tr_epochs;
            opts.batch_size = tr_batch;
            opts.lr = tr_lr;
            opts.seed = tr_seed;
            if (!tr_quiet) {
                opts.on_epoch = [&err](EpochRecord const& r) {
                    err << "epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss << '\n';
                };
            }
            auto const result = train(*model, ds, opts);

            std::string history = "epoch,train_loss,val_loss\n";
            for (auto const& r : result.history) {
                history += std::to_string(r.epoch) + ',' + format_double(r.train_loss) + ',' +
                           format_double(r.val_loss) + '\n';
            }
            fs::path const history_path = fs::path(tr_out).string() + ".history.csv";
            write_text_file_atomic(history_path, history);

            CheckpointMetadata meta;
            meta.seed = tr_seed;
            meta.epochs_run = tr_epochs;
            meta.best_epoch = result.best_epoch;
            meta.best_val_loss = result.best_val_loss;
            meta.dataset_hash = ds.config_hash;
            meta.metrics_json = ordered_json{{"batch_size", result.batch_size}, {"lr", tr_lr}}.dump();
            save_checkpoint(tr_out, *model, meta);
            err << "best epoch " << result.best_epoch << " (val loss " << result.best_val_loss << "), wrote "
                << tr_out << '\n';

            manifest.command = "train";
            manifest.config_hash = fnv1a_hex(model_config_to_json(config) + ds.config_hash);
            manifest.seed = tr_seed;
            manifest.inputs = {tr_dataset};
            manifest.outputs = {tr_out, history_path.string()};
            manifest.write_next_to(tr_out);
        } else if (*eval_cmd) {
            if (ev_checkpoint.empty() && !ev_dc) {
                err << "error: eval needs --checkpoint or --dc\n";
                return 2;
            }
            Dataset const ds = read_dataset(ev_dataset);
            auto const samples = samples_of(ds, ev_split);
            std::vector<Tensor> preds;
            std::string model_id;
            if (ev_dc) {
                for (auto const* s : samples) preds.push_back(dc_predictions(*s));
                model_id = "dcpf";
            } else {
                auto loaded = load_checkpoint(ev_checkpoint);
                preds = predict(*loaded.model, samples);
                model_id = std::string(to_string(loaded.model->config().kind));
            }
            EvalReport report = nrmse(target_rows(samples), stack_rows(preds));
            report.model_id = model_id;
            report.dataset_id = ds.config_hash;
            if (ev_report.empty()) {
                out << eval_report_csv(report);
            } else {
                write_text_file_atomic(ev_report, eval_report_csv(report));
            }
            if (!ev_json.empty()) write_text_file_atomic(ev_json, eval_report_json(report));
            err << model_id << " NRMSE on " << ev_split << ": " << report.nrmse << " (" << report.n_rows
                << " rows)\n";
            if (!ev_report.empty()) {
                manifest.command = "eval";
                manifest.config_hash = ds.config_hash;
                manifest.seed = ds.seed;
                manifest.inputs = {ev_dataset};
                if (!ev_checkpoint.empty()) manifest.inputs.push_back(ev_checkpoint);
                manifest.outputs = {ev_report};
                if (!ev_json.empty()) manifest.outputs.push_back(ev_json);
                manifest.write_next_to(ev_report);
            }
        } else if (*gradcheck) {
            ModelKind const kind = parse_model_kind(gc_model);
            Grid const grid = toy_grid();
            auto const sol = solve_nr(grid);
            LineGraphSample const sample = make_sample(grid, &sol, grid);
            Batch const batch = make_batch(sample);
            ModelConfig config = gc_full ? ModelConfig::defaults(kind) : toy_config(kind);
            if (kind == ModelKind::GlobalMlp) {
                config.max_buses = grid.n_buses();
                config.max_branches = grid.branches.size();
            }
            auto model = make_model(config, gc_seed);
            GradCheckOptions opts;
            opts.tolerance = gc_tol;
            opts.magnitude_floor = gc_floor;
            opts.max_entries = gc_entries;
            opts.seed = gc_seed;
            auto const r = gradient_check(*model, batch, opts);
            out << "model,checked,skipped,failures,worst_parameter,worst_index,analytic,numeric,relative_error\n";
            out << to_string(kind) << ',' << r.checked << ',' << r.skipped << ',' << r.failures << ','
                << r.worst.parameter << ',' << r.worst.index << ',' << format_double(r.worst.analytic) << ','
                << format_double(r.worst.numeric) << ',' << format_double(r.worst.relative_error) << '\n';
            if (!r.passed()) {
                err << "error: gradient check failed\n";
                return 1;
            }
        } else if (*smooth) {
            Dataset const ds = read_dataset(sm_dataset);
            auto const samples = samples_of(ds, sm_split);
            auto loaded = load_checkpoint(sm_checkpoint);
            auto const preds = predict(*loaded.model, samples);
            auto const report = smoothness_report(preds, samples);
            write_text_file_atomic(sm_out, smoothness_csv(report));
            fs::path const json_path = fs::path(sm_out).replace_extension(".json");
            write_text_file_atomic(json_path, smoothness_json(report));
            err << "mean cosine distance: prediction " << report.prediction_mean() << ", label "
                << report.label_mean() << '\n';
            manifest.command = "smoothness";
            manifest.config_hash = ds.config_hash;
            manifest.seed = ds.seed;
            manifest.inputs = {sm_dataset, sm_checkpoint};
            manifest.outputs = {sm_out, json_path.string()};
            manifest.write_next_to(sm_out);
        }
    } catch (Error const& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (std::exception const& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace gridflow
