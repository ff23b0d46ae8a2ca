#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gridflow/models.hpp"
#include "gridflow/sampler.hpp"

namespace gridflow {

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;  // mean over the epoch's batches, weighted by size
    double val_loss = 0.0;
};

struct TrainOptions {
    int epochs = 250;
    std::size_t batch_size = 0;  // 0: 16 for one grid, 32 for a multi-grid dataset
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::function<void(EpochRecord const&)> on_epoch;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    double best_val_loss = 0.0;
    std::size_t batch_size = 0;
};

/// Mini-batch Adam on the train split; after the last epoch the parameters
/// of the epoch with the lowest validation loss are restored (earliest on
/// ties). Throws Error(EmptySplit) when train or val is empty.
TrainResult train(Model& model, Dataset const& dataset, TrainOptions const& options);

/// MSE over all vertices and targets of the given samples.
double evaluate_loss(Model const& model, std::span<LineGraphSample const* const> samples,
                     std::size_t batch_size = 64);

/// Per-vertex predictions for each sample, in order.
std::vector<Tensor> predict(Model const& model, std::span<LineGraphSample const* const> samples,
                            std::size_t batch_size = 64);

}  // namespace gridflow
