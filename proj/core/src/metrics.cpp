#include "gridflow/metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gridflow/dc_solver.hpp"
#include "gridflow/error.hpp"

namespace gridflow {

namespace {

constexpr std::array<char const*, kTargetWidth> kTargetNames = {"Pf", "Qf", "If_re", "If_im",
                                                                "Pt", "Qt", "It_re", "It_im"};

std::string format_double(double d) {
    std::ostringstream ss;
    ss.precision(17);
    ss << d;
    return ss.str();
}

}  // namespace

EvalReport nrmse(Tensor const& target, Tensor const& prediction) {
    if (!target.same_shape(prediction) || target.cols != kTargetWidth) {
        throw Error(ErrorKind::DimensionMismatch, "nrmse needs equal N x 8 tensors");
    }
    if (target.rows < 2) throw Error(ErrorKind::ZeroVariance, "need at least two rows");
    EvalReport r;
    r.n_rows = target.rows;
    double const n = static_cast<double>(target.rows);
    for (std::size_t j = 0; j < kTargetWidth; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < target.rows; ++i) mean += target(i, j);
        mean /= n;
        double var = 0.0;
        double mse = 0.0;
        for (std::size_t i = 0; i < target.rows; ++i) {
            double const d = target(i, j) - mean;
            var += d * d;
            double const e = prediction(i, j) - target(i, j);
            mse += e * e;
        }
        var /= n - 1.0;
        mse /= n;
        if (!(var > 0.0)) {
            throw Error(ErrorKind::ZeroVariance, std::string("target column ") + kTargetNames[j] + " is constant");
        }
        r.per_feature[j] = std::sqrt(mse / var);
    }
    r.nrmse = std::accumulate(r.per_feature.begin(), r.per_feature.end(), 0.0) / static_cast<double>(kTargetWidth);
    return r;
}

double cosine_distance(std::span<double const> u, std::span<double const> v) {
    if (u.size() != v.size()) throw Error(ErrorKind::DimensionMismatch, "cosine distance of unequal lengths");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) throw Error(ErrorKind::ZeroVector, "cosine distance of a zero vector");
    double const c = dot / (std::sqrt(nu) * std::sqrt(nv));
    return 1.0 - std::clamp(c, -1.0, 1.0);
}

namespace {

double joint_mean(std::vector<double> const& values, std::vector<double> const& other) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::isnan(values[i]) || i >= other.size() || std::isnan(other[i])) continue;
        sum += values[i];
        ++count;
    }
    return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(count);
}

double norm_of(std::span<double const> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

double SmoothnessReport::prediction_mean() const { return joint_mean(prediction, label); }
double SmoothnessReport::label_mean() const { return joint_mean(label, prediction); }

SmoothnessReport smoothness_report(std::span<Tensor const> predictions,
                                   std::span<LineGraphSample const* const> samples) {
    if (samples.empty()) throw Error(ErrorKind::InvalidArgument, "no samples");
    if (predictions.size() != samples.size()) throw Error(ErrorKind::DimensionMismatch, "one prediction per sample");
    auto const& first = *samples.front();
    std::size_t const n = first.n_vertices();
    for (std::size_t s = 0; s < samples.size(); ++s) {
        auto const& smp = *samples[s];
        if (smp.grid_name != first.grid_name || !(smp.adjacency == first.adjacency) ||
            smp.branch_slots != first.branch_slots) {
            throw Error(ErrorKind::MixedTopology, "samples do not share one topology");
        }
        if (!smp.targets) throw Error(ErrorKind::InvalidArgument, "samples have no labels");
        if (predictions[s].rows != n || predictions[s].cols != kTargetWidth) {
            throw Error(ErrorKind::DimensionMismatch, "prediction shape");
        }
    }

    std::array<double, kTargetWidth> mean{};
    for (auto const* smp : samples) {
        for (std::size_t v = 0; v < n; ++v) {
            for (std::size_t j = 0; j < kTargetWidth; ++j) mean[j] += (*smp->targets)(v, j);
        }
    }
    for (auto& m : mean) m /= static_cast<double>(n * samples.size());

    double const floor = kNegligibleNorm * norm_of(mean);
    if (!(floor > 0.0)) throw Error(ErrorKind::ZeroVector, "mean label vector is zero");

    SmoothnessReport r;
    r.grid_name = first.grid_name;
    r.prediction.assign(n, 0.0);
    r.label.assign(n, 0.0);
    std::vector<std::size_t> n_pred(n, 0), n_label(n, 0);
    for (std::size_t s = 0; s < samples.size(); ++s) {
        for (std::size_t v = 0; v < n; ++v) {
            auto const p = predictions[s].row(v);
            auto const y = samples[s]->targets->row(v);
            if (norm_of(p) > floor) r.prediction[v] += cosine_distance(p, mean), ++n_pred[v];
            if (norm_of(y) > floor) r.label[v] += cosine_distance(y, mean), ++n_label[v];
        }
    }
    double const nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t v = 0; v < n; ++v) {
        r.prediction[v] = n_pred[v] ? r.prediction[v] / static_cast<double>(n_pred[v]) : nan;
        r.label[v] = n_label[v] ? r.label[v] / static_cast<double>(n_label[v]) : nan;
    }
    return r;
}

Tensor stack_rows(std::span<Tensor const> parts) {
    std::size_t rows = 0;
    std::size_t cols = parts.empty() ? 0 : parts.front().cols;
    for (auto const& p : parts) {
        if (p.cols != cols) throw Error(ErrorKind::DimensionMismatch, "stack_rows column count");
        rows += p.rows;
    }
    Tensor out(rows, cols);
    auto it = out.data.begin();
    for (auto const& p : parts) it = std::copy(p.data.begin(), p.data.end(), it);
    return out;
}

Tensor dc_predictions(LineGraphSample const& sample) {
    Grid const grid = grid_from_sample(sample);
    return flows_to_tensor(dc_targets(grid, solve_dc(grid)));
}

std::string eval_report_csv(EvalReport const& r) {
    std::string out = "model,dataset,n_rows,nrmse";
    for (auto const* name : kTargetNames) out += std::string(",nrmse_") + name;
    out += '\n';
    out += r.model_id + ',' + r.dataset_id + ',' + std::to_string(r.n_rows) + ',' + format_double(r.nrmse);
    for (double v : r.per_feature) out += ',' + format_double(v);
    out += '\n';
    return out;
}

std::string eval_report_json(EvalReport const& r) {
    nlohmann::ordered_json j;
    j["model"] = r.model_id;
    j["dataset"] = r.dataset_id;
    j["n_rows"] = r.n_rows;
    j["nrmse"] = r.nrmse;
    auto& per = j["per_feature"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < kTargetWidth; ++i) per[kTargetNames[i]] = r.per_feature[i];
    return j.dump(2);
}

std::string smoothness_csv(SmoothnessReport const& r) {
    std::string out = "vertex,prediction,label\n";
    for (std::size_t v = 0; v < r.prediction.size(); ++v) {
        out += std::to_string(v) + ',' + format_double(r.prediction[v]) + ',' + format_double(r.label[v]) + '\n';
    }
    return out;
}

std::string smoothness_json(SmoothnessReport const& r) {
    nlohmann::ordered_json j;
    j["grid"] = r.grid_name;
    j["prediction_mean"] = r.prediction_mean();
    j["label_mean"] = r.label_mean();
    j["prediction"] = r.prediction;
    j["label"] = r.label;
    return j.dump(2);
}

}  // namespace gridflow
