#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridflow/line_graph.hpp"
#include "gridflow/tensor.hpp"

namespace gridflow {

enum class ModelKind { ArmaGnn, GcnStack, LocalMlp, GlobalMlp };

/// "arma", "gcn", "local-mlp", "global-mlp".
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Layer sizes for all four architectures; fields a kind does not use are
/// ignored. `defaults(kind)` gives the reference architecture.
struct ModelConfig {
    ModelKind kind = ModelKind::ArmaGnn;
    double alpha = 0.2;
    std::size_t input_width = kFeatureWidth;
    std::size_t output_width = kTargetWidth;

    // ArmaGnn: FC pre-layers, ARMA layers, FC post-layers, linear output.
    std::vector<std::size_t> pre_layers;
    std::size_t graph_layers = 0;  // ARMA or GCN layer count
    std::size_t graph_width = 0;
    std::size_t stacks = 0;        // ARMA K
    std::size_t iterations = 0;    // ARMA T
    std::vector<std::size_t> post_layers;

    // LocalMlp hidden layers; GlobalMlp hidden layers after the concatenation.
    std::vector<std::size_t> hidden_layers;

    // GlobalMlp: bus and branch pre-layers over a fixed padded layout.
    std::size_t bus_units = 0;
    std::size_t branch_units = 0;
    std::size_t max_buses = 0;
    std::size_t max_branches = 0;

    static ModelConfig defaults(ModelKind kind);
    /// Throws Error(InvalidArgument) for an unusable configuration.
    void check() const;

    friend bool operator==(ModelConfig const&, ModelConfig const&) = default;
};

std::string model_config_to_json(ModelConfig const& config);
ModelConfig model_config_from_json(std::string_view text);

/// Several samples combined as a disjoint union of line graphs.
struct Batch {
    Tensor features;                // N x 21
    std::optional<Tensor> targets;  // N x 8, present when every sample has targets
    SparseMatrix adjacency;         // block diagonal, binary
    SparseMatrix gcn_adjacency;     // normalized with self-loops
    SparseMatrix arma_adjacency;    // normalized without self-loops
    std::vector<std::size_t> offsets;  // sample s owns vertices [offsets[s], offsets[s+1])
    std::vector<std::size_t> branch_slots;
    std::vector<std::array<std::size_t, 2>> bus_slots;

    std::size_t n_samples() const { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t n_vertices() const { return features.rows; }
};

Batch make_batch(std::span<LineGraphSample const* const> samples);
Batch make_batch(LineGraphSample const& sample);

/// Activations recorded by a forward pass, consumed by the matching backward.
class Tape {
  public:
    void push(Tensor t) { values_.push_back(std::move(t)); }
    Tensor pop() {
        Tensor t = std::move(values_.back());
        values_.pop_back();
        return t;
    }
    bool empty() const { return values_.empty(); }
    void clear() { values_.clear(); }

  private:
    std::vector<Tensor> values_;
};

class Model {
  public:
    virtual ~Model() = default;

    ModelConfig const& config() const { return config_; }

    /// Per-vertex predictions (N x 8). Pure unless a tape is given.
    virtual Tensor forward(Batch const& batch, Tape* tape = nullptr) const = 0;

    /// Accumulates d(loss)/d(param) into every parameter's grad, given
    /// d(loss)/d(prediction) and the tape of the forward pass on `batch`.
    virtual void backward(Batch const& batch, Tape& tape, Tensor const& grad_output) = 0;

    /// Parameters in a fixed order (the checkpoint order).
    std::vector<Parameter*> parameters();
    std::vector<Parameter const*> parameters() const;
    std::size_t parameter_count() const;
    void zero_grad();

  protected:
    explicit Model(ModelConfig config) : config_(std::move(config)) {}
    Parameter& add_parameter(std::string name, Tensor value);

  private:
    ModelConfig config_;
    std::vector<std::unique_ptr<Parameter>> params_;
};

/// Builds a model with Glorot-uniform weights and zero biases.
std::unique_ptr<Model> make_model(ModelConfig const& config, std::uint64_t seed);

/// Forward, MSE against the batch targets, backward. Grads are zeroed first.
/// Returns the loss. Throws Error(InvalidArgument) without targets.
double loss_and_gradients(Model& model, Batch const& batch);

/// Single ARMA layer on its own, exposed for tests:
/// per stack k, X1 = s(A X W0 + X V0), Xt = s(A X(t-1) W + X V), mean over k.
struct ArmaStackWeights {
    Tensor w0, v0, w, v;
};
Tensor arma_layer_forward(SparseMatrix const& a, Tensor const& x, std::span<ArmaStackWeights const> stacks,
                          std::size_t iterations, double alpha);
/// s(A X W) with the self-loop normalized adjacency.
Tensor gcn_layer_forward(SparseMatrix const& a, Tensor const& x, Tensor const& w, double alpha);

struct GradCheckOptions {
    double step = 1e-6;
    double tolerance = 1e-4;
    double magnitude_floor = 1e-8;     // entries with both gradients below are skipped
    std::size_t max_entries = 0;       // per parameter; 0 checks every entry
    std::uint64_t seed = 0;            // entry sampling when max_entries > 0
};

struct GradCheckEntry {
    std::string parameter;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double relative_error = 0.0;
};

struct GradCheckResult {
    std::size_t checked = 0;
    std::size_t skipped = 0;
    std::size_t failures = 0;
    GradCheckEntry worst;
    bool passed() const { return failures == 0 && checked > 0; }
};

/// Compares analytic parameter gradients of the batch MSE loss against
/// central finite differences.
GradCheckResult gradient_check(Model& model, Batch const& batch, GradCheckOptions const& options = {});

/// Small-width variant of a kind for exhaustive gradient checks.
ModelConfig toy_config(ModelKind kind, std::size_t max_buses = 0, std::size_t max_branches = 0);

}  // namespace gridflow
