#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "gridflow/line_graph.hpp"
#include "gridflow/tensor.hpp"

namespace gridflow {

struct EvalReport {
    double nrmse = 0.0;
    std::array<double, kTargetWidth> per_feature{};
    std::size_t n_rows = 0;
    std::string model_id;
    std::string dataset_id;
};

/// Rows are (sample, branch) pairs; per column sqrt(MSE / unbiased variance
/// of the target column), averaged over the columns. Throws
/// Error(ZeroVariance) for a constant target column.
EvalReport nrmse(Tensor const& target, Tensor const& prediction);

/// 1 - u.v / (|u| |v|). Throws Error(ZeroVector).
double cosine_distance(std::span<double const> u, std::span<double const> v);

struct SmoothnessReport {
    std::string grid_name;
    std::vector<double> prediction;  // per vertex; NaN where undefined
    std::vector<double> label;       // per vertex; NaN where undefined

    /// Means over the vertices where both entries are defined.
    double prediction_mean() const;
    double label_mean() const;
};

/// Relative norm (against the mean label vector) below which a vector has
/// no usable direction and is left out of the cosine averages.
inline constexpr double kNegligibleNorm = 1e-9;

/// Per vertex, the mean over samples of the cosine distance between the
/// value at that vertex and the mean label vector over all vertices and
/// samples. Vectors of negligible norm (a branch that carries no flow) are
/// skipped; a vertex left without terms is NaN. Throws Error(MixedTopology)
/// unless all samples share one line graph, Error(InvalidArgument) without
/// labels, Error(ZeroVector) when the mean label vector is zero.
SmoothnessReport smoothness_report(std::span<Tensor const> predictions,
                                   std::span<LineGraphSample const* const> samples);

/// Stacks per-sample tensors row-wise.
Tensor stack_rows(std::span<Tensor const> parts);

/// DC power flow predictions for a sample, in the 8-target layout.
Tensor dc_predictions(LineGraphSample const& sample);

std::string eval_report_csv(EvalReport const& report);
std::string eval_report_json(EvalReport const& report);
std::string smoothness_csv(SmoothnessReport const& report);
std::string smoothness_json(SmoothnessReport const& report);

}  // namespace gridflow
