#include "gridflow/training.hpp"

#include <algorithm>
#include <numeric>

#include "gridflow/error.hpp"

namespace gridflow {

namespace {

std::vector<Tensor> snapshot(Model const& model) {
    std::vector<Tensor> out;
    for (auto const* p : model.parameters()) out.push_back(p->value);
    return out;
}

void restore(Model& model, std::vector<Tensor> const& values) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

template <typename F>
void for_each_batch(std::span<LineGraphSample const* const> samples, std::size_t batch_size, F&& f) {
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        std::size_t const end = std::min(samples.size(), start + batch_size);
        f(samples.subspan(start, end - start));
    }
}

}  // namespace

double evaluate_loss(Model const& model, std::span<LineGraphSample const* const> samples, std::size_t batch_size) {
    double sum = 0.0;
    std::size_t count = 0;
    for_each_batch(samples, std::max<std::size_t>(1, batch_size), [&](auto chunk) {
        Batch const batch = make_batch(chunk);
        if (!batch.targets) throw Error(ErrorKind::InvalidArgument, "samples have no targets");
        Tensor const pred = model.forward(batch);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            double const d = pred.data[i] - batch.targets->data[i];
            sum += d * d;
        }
        count += pred.size();
    });
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::vector<Tensor> predict(Model const& model, std::span<LineGraphSample const* const> samples,
                            std::size_t batch_size) {
    std::vector<Tensor> out;
    out.reserve(samples.size());
    for_each_batch(samples, std::max<std::size_t>(1, batch_size), [&](auto chunk) {
        Batch const batch = make_batch(chunk);
        Tensor const pred = model.forward(batch);
        for (std::size_t s = 0; s < batch.n_samples(); ++s) {
            std::size_t const lo = batch.offsets[s];
            std::size_t const hi = batch.offsets[s + 1];
            Tensor t(hi - lo, pred.cols);
            std::copy(pred.data.begin() + static_cast<long>(lo * pred.cols),
                      pred.data.begin() + static_cast<long>(hi * pred.cols), t.data.begin());
            out.push_back(std::move(t));
        }
    });
    return out;
}

TrainResult train(Model& model, Dataset const& dataset, TrainOptions const& options) {
    auto const train_set = dataset.select(Split::Train);
    auto const val_set = dataset.select(Split::Val);
    if (train_set.empty()) throw Error(ErrorKind::EmptySplit, "dataset has no training samples");
    if (val_set.empty()) throw Error(ErrorKind::EmptySplit, "dataset has no validation samples");
    if (options.epochs < 0) throw Error(ErrorKind::InvalidArgument, "epochs must be non-negative");

    TrainResult result;
    result.batch_size = options.batch_size ? options.batch_size : (dataset.grids.size() > 1 ? 32 : 16);

    AdamState adam(AdamOptions{.lr = options.lr});
    auto params = model.parameters();
    std::vector<Tensor> best = snapshot(model);
    result.best_val_loss = evaluate_loss(model, val_set);

    std::vector<std::size_t> order(train_set.size());
    std::vector<LineGraphSample const*> chunk;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng = Rng::stream(options.seed, static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            auto const j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
            std::swap(order[i - 1], order[j]);
        }
        double weighted = 0.0;
        std::size_t elements = 0;
        for (std::size_t start = 0; start < order.size(); start += result.batch_size) {
            std::size_t const end = std::min(order.size(), start + result.batch_size);
            chunk.clear();
            for (std::size_t i = start; i < end; ++i) chunk.push_back(train_set[order[i]]);
            Batch const batch = make_batch(chunk);
            double const loss = loss_and_gradients(model, batch);
            adam.step(params);
            weighted += loss * static_cast<double>(batch.targets->size());
            elements += batch.targets->size();
        }
        EpochRecord rec{epoch, weighted / static_cast<double>(elements), evaluate_loss(model, val_set)};
        result.history.push_back(rec);
        if (result.best_epoch < 0 || rec.val_loss < result.best_val_loss) {
            result.best_epoch = epoch;
            result.best_val_loss = rec.val_loss;
            best = snapshot(model);
        }
        if (options.on_epoch) options.on_epoch(rec);
    }
    restore(model, best);
    return result;
}

}  // namespace gridflow
