#include "gridflow/models.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridflow/error.hpp"
#include "gridflow/random.hpp"

namespace gridflow {

namespace {

using ordered_json = nlohmann::ordered_json;

struct DenseLayer {
    Parameter* w = nullptr;
    Parameter* b = nullptr;
    bool activate = true;

    Tensor forward(Tensor const& x, Tape* tape, double alpha) const {
        Tensor z = dense_forward(x, w->value, b->value);
        Tensor out = activate ? leaky_relu(z, alpha) : z;
        if (tape) {
            tape->push(x);
            if (activate) tape->push(std::move(z));
        }
        return out;
    }

    Tensor backward(Tensor grad, Tape& tape, double alpha) {
        if (activate) grad = leaky_relu_backward(tape.pop(), grad, alpha);
        Tensor const x = tape.pop();
        auto g = dense_backward(x, w->value, grad);
        add_inplace(w->grad, g.dw);
        add_inplace(b->grad, g.db);
        return std::move(g.dx);
    }
};

struct GcnLayer {
    Parameter* w = nullptr;

    Tensor forward(SparseMatrix const& a, Tensor const& x, Tape* tape, double alpha) const {
        Tensor z = spmm(a, matmul(x, w->value));
        Tensor out = leaky_relu(z, alpha);
        if (tape) {
            tape->push(x);
            tape->push(std::move(z));
        }
        return out;
    }

    Tensor backward(SparseMatrix const& a, Tensor const& grad, Tape& tape, double alpha) {
        Tensor const dz = leaky_relu_backward(tape.pop(), grad, alpha);
        Tensor const x = tape.pop();
        Tensor const dxw = spmm_backward(a, dz);
        add_inplace(w->grad, matmul_tn(x, dxw));
        return matmul_nt(dxw, w->value);
    }
};

struct ArmaStack {
    Parameter* w0 = nullptr;
    Parameter* v0 = nullptr;
    Parameter* w = nullptr;
    Parameter* v = nullptr;
};

Tensor arma_stack_forward(SparseMatrix const& a, Tensor const& x, Tensor const& w0, Tensor const& v0, Tensor const& w,
                          Tensor const& v, std::size_t iterations, double alpha, Tape* tape) {
    Tensor z = add(spmm(a, matmul(x, w0)), matmul(x, v0));
    Tensor h = leaky_relu(z, alpha);
    if (tape) tape->push(std::move(z));
    if (iterations < 2) return h;
    Tensor const xv = matmul(x, v);
    for (std::size_t t = 2; t <= iterations; ++t) {
        z = add(spmm(a, matmul(h, w)), xv);
        h = leaky_relu(z, alpha);
        if (tape) tape->push(std::move(z));
    }
    return h;
}

struct ArmaLayer {
    std::vector<ArmaStack> stacks;
    std::size_t iterations = 1;

    Tensor forward(SparseMatrix const& a, Tensor const& x, Tape* tape, double alpha) const {
        Tensor out;
        for (auto const& s : stacks) {
            Tensor h = arma_stack_forward(a, x, s.w0->value, s.v0->value, s.w->value, s.v->value, iterations, alpha,
                                          tape);
            if (out.size() == 0) {
                out = std::move(h);
            } else {
                add_inplace(out, h);
            }
        }
        scale_inplace(out, 1.0 / static_cast<double>(stacks.size()));
        if (tape) tape->push(x);
        return out;
    }

    Tensor backward(SparseMatrix const& a, Tensor const& grad, Tape& tape, double alpha) {
        Tensor const x = tape.pop();
        Tensor dx(x.rows, x.cols);
        Tensor g_stack = grad;
        scale_inplace(g_stack, 1.0 / static_cast<double>(stacks.size()));
        for (auto s = stacks.rbegin(); s != stacks.rend(); ++s) {
            std::vector<Tensor> z(iterations);
            for (std::size_t t = iterations; t-- > 0;) z[t] = tape.pop();

            Tensor dh = g_stack;
            Tensor dxv;
            for (std::size_t t = iterations - 1; t >= 1; --t) {
                Tensor const dz = leaky_relu_backward(z[t], dh, alpha);
                if (dxv.size() == 0) {
                    dxv = dz;
                } else {
                    add_inplace(dxv, dz);
                }
                Tensor const m = spmm_backward(a, dz);
                add_inplace(s->w->grad, matmul_tn(leaky_relu(z[t - 1], alpha), m));
                dh = matmul_nt(m, s->w->value);
            }
            Tensor const dz1 = leaky_relu_backward(z[0], dh, alpha);
            Tensor const m1 = spmm_backward(a, dz1);
            add_inplace(s->w0->grad, matmul_tn(x, m1));
            add_inplace(s->v0->grad, matmul_tn(x, dz1));
            add_inplace(dx, matmul_nt(m1, s->w0->value));
            add_inplace(dx, matmul_nt(dz1, s->v0->value));
            if (dxv.size() != 0) {
                add_inplace(s->v->grad, matmul_tn(x, dxv));
                add_inplace(dx, matmul_nt(dxv, s->v->value));
            }
        }
        return dx;
    }
};

class ModelBase : public Model {
  protected:
    ModelBase(ModelConfig const& config, std::uint64_t seed) : Model(config), rng_(Rng::stream(seed, 0)) {}

    DenseLayer make_dense(std::string const& name, std::size_t in, std::size_t out, bool activate) {
        DenseLayer d;
        d.w = &add_parameter(name + ".w", glorot_uniform(in, out, rng_));
        d.b = &add_parameter(name + ".b", Tensor(1, out));
        d.activate = activate;
        return d;
    }

    std::vector<DenseLayer> make_dense_chain(std::string const& prefix, std::size_t& width,
                                             std::vector<std::size_t> const& sizes) {
        std::vector<DenseLayer> layers;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            layers.push_back(make_dense(prefix + std::to_string(i), width, sizes[i], true));
            width = sizes[i];
        }
        return layers;
    }

    Tensor chain_forward(std::vector<DenseLayer> const& layers, Tensor h, Tape* tape) const {
        for (auto const& l : layers) h = l.forward(h, tape, config().alpha);
        return h;
    }

    Tensor chain_backward(std::vector<DenseLayer>& layers, Tensor g, Tape& tape) {
        for (auto l = layers.rbegin(); l != layers.rend(); ++l) g = l->backward(std::move(g), tape, config().alpha);
        return g;
    }

    Rng rng_;
};

class ArmaGnn final : public ModelBase {
  public:
    ArmaGnn(ModelConfig const& c, std::uint64_t seed) : ModelBase(c, seed) {
        std::size_t width = c.input_width;
        pre_ = make_dense_chain("pre", width, c.pre_layers);
        for (std::size_t l = 0; l < c.graph_layers; ++l) {
            ArmaLayer layer;
            layer.iterations = c.iterations;
            for (std::size_t k = 0; k < c.stacks; ++k) {
                std::string const p = "arma" + std::to_string(l) + ".k" + std::to_string(k);
                ArmaStack s;
                s.w0 = &add_parameter(p + ".w0", glorot_uniform(width, c.graph_width, rng_));
                s.v0 = &add_parameter(p + ".v0", glorot_uniform(width, c.graph_width, rng_));
                s.w = &add_parameter(p + ".w", glorot_uniform(c.graph_width, c.graph_width, rng_));
                s.v = &add_parameter(p + ".v", glorot_uniform(width, c.graph_width, rng_));
                layer.stacks.push_back(s);
            }
            arma_.push_back(std::move(layer));
            width = c.graph_width;
        }
        post_ = make_dense_chain("post", width, c.post_layers);
        out_ = make_dense("out", width, c.output_width, false);
    }

    Tensor forward(Batch const& batch, Tape* tape) const override {
        double const alpha = config().alpha;
        Tensor h = chain_forward(pre_, batch.features, tape);
        for (auto const& l : arma_) h = l.forward(batch.arma_adjacency, h, tape, alpha);
        h = chain_forward(post_, std::move(h), tape);
        return out_.forward(h, tape, alpha);
    }

    void backward(Batch const& batch, Tape& tape, Tensor const& grad) override {
        double const alpha = config().alpha;
        Tensor g = out_.backward(grad, tape, alpha);
        g = chain_backward(post_, std::move(g), tape);
        for (auto l = arma_.rbegin(); l != arma_.rend(); ++l) g = l->backward(batch.arma_adjacency, g, tape, alpha);
        chain_backward(pre_, std::move(g), tape);
    }

  private:
    std::vector<DenseLayer> pre_;
    std::vector<ArmaLayer> arma_;
    std::vector<DenseLayer> post_;
    DenseLayer out_;
};

class GcnStack final : public ModelBase {
  public:
    GcnStack(ModelConfig const& c, std::uint64_t seed) : ModelBase(c, seed) {
        std::size_t width = c.input_width;
        pre_ = make_dense_chain("pre", width, c.pre_layers);
        for (std::size_t l = 0; l < c.graph_layers; ++l) {
            gcn_.push_back({&add_parameter("gcn" + std::to_string(l) + ".w",
                                           glorot_uniform(width, c.graph_width, rng_))});
            width = c.graph_width;
        }
        post_ = make_dense_chain("post", width, c.post_layers);
        out_ = make_dense("out", width, c.output_width, false);
    }

    Tensor forward(Batch const& batch, Tape* tape) const override {
        double const alpha = config().alpha;
        Tensor h = chain_forward(pre_, batch.features, tape);
        for (auto const& l : gcn_) h = l.forward(batch.gcn_adjacency, h, tape, alpha);
        h = chain_forward(post_, std::move(h), tape);
        return out_.forward(h, tape, alpha);
    }

    void backward(Batch const& batch, Tape& tape, Tensor const& grad) override {
        double const alpha = config().alpha;
        Tensor g = out_.backward(grad, tape, alpha);
        g = chain_backward(post_, std::move(g), tape);
        for (auto l = gcn_.rbegin(); l != gcn_.rend(); ++l) g = l->backward(batch.gcn_adjacency, g, tape, alpha);
        chain_backward(pre_, std::move(g), tape);
    }

  private:
    std::vector<DenseLayer> pre_;
    std::vector<GcnLayer> gcn_;
    std::vector<DenseLayer> post_;
    DenseLayer out_;
};

class LocalMlp final : public ModelBase {
  public:
    LocalMlp(ModelConfig const& c, std::uint64_t seed) : ModelBase(c, seed) {
        std::size_t width = c.input_width;
        hidden_ = make_dense_chain("hidden", width, c.hidden_layers);
        out_ = make_dense("out", width, c.output_width, false);
    }

    Tensor forward(Batch const& batch, Tape* tape) const override {
        return out_.forward(chain_forward(hidden_, batch.features, tape), tape, config().alpha);
    }

    void backward(Batch const&, Tape& tape, Tensor const& grad) override {
        chain_backward(hidden_, out_.backward(grad, tape, config().alpha), tape);
    }

  private:
    std::vector<DenseLayer> hidden_;
    DenseLayer out_;
};

// Attribute-major padded layout: bus attribute a of bus slot s sits at
// a * max_buses + s; branch attribute a of branch slot s at a * max_branches + s.
class GlobalMlp final : public ModelBase {
  public:
    GlobalMlp(ModelConfig const& c, std::uint64_t seed) : ModelBase(c, seed) {
        bus_ = make_dense("bus", kBusFeatureWidth * c.max_buses, c.bus_units, true);
        branch_ = make_dense("branch", kBranchFeatureWidth * c.max_branches, c.branch_units, true);
        std::size_t width = c.bus_units + c.branch_units;
        hidden_ = make_dense_chain("hidden", width, c.hidden_layers);
        out_ = make_dense("out", width, c.output_width * c.max_branches, false);
    }

    Tensor forward(Batch const& batch, Tape* tape) const override {
        auto const& c = config();
        check_layout(batch);
        std::size_t const n_samples = batch.n_samples();
        Tensor xbus(n_samples, kBusFeatureWidth * c.max_buses);
        Tensor xbr(n_samples, kBranchFeatureWidth * c.max_branches);
        for (std::size_t s = 0; s < n_samples; ++s) {
            for (std::size_t v = batch.offsets[s]; v < batch.offsets[s + 1]; ++v) {
                auto const row = batch.features.row(v);
                std::size_t const br = batch.branch_slots[v];
                for (std::size_t a = 0; a < kBranchFeatureWidth; ++a) xbr(s, a * c.max_branches + br) = row[a];
                for (std::size_t end = 0; end < 2; ++end) {
                    std::size_t const bus = batch.bus_slots[v][end];
                    std::size_t const base = kBranchFeatureWidth + end * kBusFeatureWidth;
                    for (std::size_t a = 0; a < kBusFeatureWidth; ++a) xbus(s, a * c.max_buses + bus) = row[base + a];
                }
            }
        }
        Tensor const hbus = bus_.forward(xbus, tape, c.alpha);
        Tensor const hbr = branch_.forward(xbr, tape, c.alpha);
        Tensor h(n_samples, c.bus_units + c.branch_units);
        for (std::size_t s = 0; s < n_samples; ++s) {
            std::copy(hbus.row(s).begin(), hbus.row(s).end(), h.row(s).begin());
            std::copy(hbr.row(s).begin(), hbr.row(s).end(), h.row(s).begin() + static_cast<long>(c.bus_units));
        }
        Tensor const out = out_.forward(chain_forward(hidden_, std::move(h), tape), tape, c.alpha);

        Tensor pred(batch.n_vertices(), c.output_width);
        for (std::size_t s = 0; s < n_samples; ++s) {
            for (std::size_t v = batch.offsets[s]; v < batch.offsets[s + 1]; ++v) {
                for (std::size_t a = 0; a < c.output_width; ++a) {
                    pred(v, a) = out(s, a * c.max_branches + batch.branch_slots[v]);
                }
            }
        }
        return pred;
    }

    void backward(Batch const& batch, Tape& tape, Tensor const& grad) override {
        auto const& c = config();
        std::size_t const n_samples = batch.n_samples();
        Tensor gout(n_samples, c.output_width * c.max_branches);
        for (std::size_t s = 0; s < n_samples; ++s) {
            for (std::size_t v = batch.offsets[s]; v < batch.offsets[s + 1]; ++v) {
                for (std::size_t a = 0; a < c.output_width; ++a) {
                    gout(s, a * c.max_branches + batch.branch_slots[v]) += grad(v, a);
                }
            }
        }
        Tensor const gh = chain_backward(hidden_, out_.backward(std::move(gout), tape, c.alpha), tape);
        Tensor gbus(n_samples, c.bus_units);
        Tensor gbr(n_samples, c.branch_units);
        for (std::size_t s = 0; s < n_samples; ++s) {
            auto const row = gh.row(s);
            std::copy(row.begin(), row.begin() + static_cast<long>(c.bus_units), gbus.row(s).begin());
            std::copy(row.begin() + static_cast<long>(c.bus_units), row.end(), gbr.row(s).begin());
        }
        branch_.backward(std::move(gbr), tape, c.alpha);
        bus_.backward(std::move(gbus), tape, c.alpha);
    }

  private:
    void check_layout(Batch const& batch) const {
        auto const& c = config();
        for (std::size_t v = 0; v < batch.n_vertices(); ++v) {
            if (batch.branch_slots[v] >= c.max_branches || batch.bus_slots[v][0] >= c.max_buses ||
                batch.bus_slots[v][1] >= c.max_buses) {
                throw Error(ErrorKind::LayoutMismatch,
                            "sample exceeds the model layout of " + std::to_string(c.max_buses) + " buses and " +
                                std::to_string(c.max_branches) + " branches");
            }
        }
    }

    DenseLayer bus_;
    DenseLayer branch_;
    std::vector<DenseLayer> hidden_;
    DenseLayer out_;
};

ordered_json sizes_json(std::vector<std::size_t> const& v) { return ordered_json(v); }

}  // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::ArmaGnn: return "arma";
        case ModelKind::GcnStack: return "gcn";
        case ModelKind::LocalMlp: return "local-mlp";
        case ModelKind::GlobalMlp: return "global-mlp";
    }
    return "arma";
}

ModelKind parse_model_kind(std::string_view text) {
    for (auto k : {ModelKind::ArmaGnn, ModelKind::GcnStack, ModelKind::LocalMlp, ModelKind::GlobalMlp}) {
        if (text == to_string(k)) return k;
    }
    throw Error(ErrorKind::InvalidArgument,
                "model must be arma|gcn|local-mlp|global-mlp, got '" + std::string(text) + "'");
}

ModelConfig ModelConfig::defaults(ModelKind kind) {
    ModelConfig c;
    c.kind = kind;
    switch (kind) {
        case ModelKind::ArmaGnn:
            c.pre_layers = {64, 64};
            c.graph_layers = 5;
            c.graph_width = 64;
            c.stacks = 2;
            c.iterations = 8;
            c.post_layers = {64, 64};
            break;
        case ModelKind::GcnStack:
            c.graph_layers = 40;
            c.graph_width = 64;
            break;
        case ModelKind::LocalMlp:
            c.hidden_layers = {256, 256, 256, 128, 128, 64};
            break;
        case ModelKind::GlobalMlp:
            c.bus_units = 64;
            c.branch_units = 64;
            c.hidden_layers = {128, 128};
            break;
    }
    return c;
}

void ModelConfig::check() const {
    auto fail = [](std::string const& m) { throw Error(ErrorKind::InvalidArgument, m); };
    if (input_width != kFeatureWidth) fail("input width must be " + std::to_string(kFeatureWidth));
    if (output_width != kTargetWidth) fail("output width must be " + std::to_string(kTargetWidth));
    if (!(alpha >= 0.0)) fail("alpha must be non-negative");
    auto positive = [&](std::vector<std::size_t> const& v, char const* what) {
        for (auto s : v) {
            if (s == 0) fail(std::string(what) + " sizes must be positive");
        }
    };
    positive(pre_layers, "pre-layer");
    positive(post_layers, "post-layer");
    positive(hidden_layers, "hidden layer");
    if ((kind == ModelKind::ArmaGnn || kind == ModelKind::GcnStack) && graph_layers > 0 && graph_width == 0) {
        fail("graph width must be positive");
    }
    if (kind == ModelKind::ArmaGnn && graph_layers > 0 && (stacks == 0 || iterations == 0)) {
        fail("ARMA layers need at least one stack and one iteration");
    }
    if (kind == ModelKind::GlobalMlp) {
        if (bus_units == 0 || branch_units == 0) fail("bus and branch units must be positive");
        if (max_buses == 0 || max_branches == 0) fail("global MLP needs max_buses and max_branches");
    }
}

std::string model_config_to_json(ModelConfig const& c) {
    ordered_json j;
    j["kind"] = std::string(to_string(c.kind));
    j["alpha"] = c.alpha;
    j["input_width"] = c.input_width;
    j["output_width"] = c.output_width;
    j["pre_layers"] = sizes_json(c.pre_layers);
    j["graph_layers"] = c.graph_layers;
    j["graph_width"] = c.graph_width;
    j["stacks"] = c.stacks;
    j["iterations"] = c.iterations;
    j["post_layers"] = sizes_json(c.post_layers);
    j["hidden_layers"] = sizes_json(c.hidden_layers);
    j["bus_units"] = c.bus_units;
    j["branch_units"] = c.branch_units;
    j["max_buses"] = c.max_buses;
    j["max_branches"] = c.max_branches;
    return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
    try {
        auto const j = ordered_json::parse(text);
        ModelConfig c;
        c.kind = parse_model_kind(j.at("kind").get<std::string>());
        c.alpha = j.at("alpha").get<double>();
        c.input_width = j.at("input_width").get<std::size_t>();
        c.output_width = j.at("output_width").get<std::size_t>();
        c.pre_layers = j.at("pre_layers").get<std::vector<std::size_t>>();
        c.graph_layers = j.at("graph_layers").get<std::size_t>();
        c.graph_width = j.at("graph_width").get<std::size_t>();
        c.stacks = j.at("stacks").get<std::size_t>();
        c.iterations = j.at("iterations").get<std::size_t>();
        c.post_layers = j.at("post_layers").get<std::vector<std::size_t>>();
        c.hidden_layers = j.at("hidden_layers").get<std::vector<std::size_t>>();
        c.bus_units = j.at("bus_units").get<std::size_t>();
        c.branch_units = j.at("branch_units").get<std::size_t>();
        c.max_buses = j.at("max_buses").get<std::size_t>();
        c.max_branches = j.at("max_branches").get<std::size_t>();
        return c;
    } catch (nlohmann::json::exception const& e) {
        throw Error(ErrorKind::SchemaError, std::string("model config: ") + e.what());
    }
}

Batch make_batch(std::span<LineGraphSample const* const> samples) {
    if (samples.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
    Batch b;
    std::size_t n = 0;
    bool all_targets = true;
    b.offsets.push_back(0);
    std::vector<SparseMatrix const*> blocks;
    for (auto const* s : samples) {
        n += s->n_vertices();
        b.offsets.push_back(n);
        all_targets = all_targets && s->targets.has_value();
        blocks.push_back(&s->adjacency);
    }
    b.features = Tensor(n, kFeatureWidth);
    if (all_targets) b.targets = Tensor(n, kTargetWidth);
    b.branch_slots.reserve(n);
    b.bus_slots.reserve(n);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto const& s = *samples[i];
        if (s.features.cols != kFeatureWidth) throw Error(ErrorKind::DimensionMismatch, "feature width");
        std::copy(s.features.data.begin(), s.features.data.end(),
                  b.features.data.begin() + static_cast<long>(b.offsets[i] * kFeatureWidth));
        if (all_targets) {
            std::copy(s.targets->data.begin(), s.targets->data.end(),
                      b.targets->data.begin() + static_cast<long>(b.offsets[i] * kTargetWidth));
        }
        b.branch_slots.insert(b.branch_slots.end(), s.branch_slots.begin(), s.branch_slots.end());
        b.bus_slots.insert(b.bus_slots.end(), s.bus_slots.begin(), s.bus_slots.end());
    }
    b.adjacency = block_diagonal(blocks);
    b.gcn_adjacency = normalize_adjacency(b.adjacency, NormalizationMode::SelfLoops);
    b.arma_adjacency = normalize_adjacency(b.adjacency, NormalizationMode::Plain);
    return b;
}

Batch make_batch(LineGraphSample const& sample) {
    LineGraphSample const* one[] = {&sample};
    return make_batch(one);
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<Parameter const*> Model::parameters() const {
    std::vector<Parameter const*> out;
    for (auto const& p : params_) out.push_back(p.get());
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (auto const& p : params_) n += p->value.size();
    return n;
}

void Model::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

Parameter& Model::add_parameter(std::string name, Tensor value) {
    params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
    return *params_.back();
}

std::unique_ptr<Model> make_model(ModelConfig const& config, std::uint64_t seed) {
    config.check();
    switch (config.kind) {
        case ModelKind::ArmaGnn: return std::make_unique<ArmaGnn>(config, seed);
        case ModelKind::GcnStack: return std::make_unique<GcnStack>(config, seed);
        case ModelKind::LocalMlp: return std::make_unique<LocalMlp>(config, seed);
        case ModelKind::GlobalMlp: return std::make_unique<GlobalMlp>(config, seed);
    }
    throw Error(ErrorKind::InvalidArgument, "unknown model kind");
}

double loss_and_gradients(Model& model, Batch const& batch) {
    if (!batch.targets) throw Error(ErrorKind::InvalidArgument, "batch has no targets");
    model.zero_grad();
    Tape tape;
    Tensor const pred = model.forward(batch, &tape);
    double const loss = mse_loss(pred, *batch.targets);
    model.backward(batch, tape, mse_grad(pred, *batch.targets));
    return loss;
}

Tensor arma_layer_forward(SparseMatrix const& a, Tensor const& x, std::span<ArmaStackWeights const> stacks,
                          std::size_t iterations, double alpha) {
    if (stacks.empty() || iterations == 0) throw Error(ErrorKind::InvalidArgument, "ARMA needs stacks and iterations");
    Tensor out;
    for (auto const& s : stacks) {
        Tensor h = arma_stack_forward(a, x, s.w0, s.v0, s.w, s.v, iterations, alpha, nullptr);
        if (out.size() == 0) {
            out = std::move(h);
        } else {
            add_inplace(out, h);
        }
    }
    scale_inplace(out, 1.0 / static_cast<double>(stacks.size()));
    return out;
}

Tensor gcn_layer_forward(SparseMatrix const& a, Tensor const& x, Tensor const& w, double alpha) {
    return leaky_relu(spmm(a, matmul(x, w)), alpha);
}

GradCheckResult gradient_check(Model& model, Batch const& batch, GradCheckOptions const& options) {
    if (!batch.targets) throw Error(ErrorKind::InvalidArgument, "gradient check needs targets");
    loss_and_gradients(model, batch);
    auto loss = [&] { return mse_loss(model.forward(batch), *batch.targets); };

    GradCheckResult result;
    Rng rng = Rng::stream(options.seed, 1);
    for (Parameter* p : model.parameters()) {
        std::vector<std::size_t> idx(p->value.size());
        std::iota(idx.begin(), idx.end(), 0);
        if (options.max_entries > 0 && options.max_entries < idx.size()) {
            for (std::size_t i = 0; i < options.max_entries; ++i) {
                auto const j = static_cast<std::size_t>(
                    rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(idx.size() - 1)));
                std::swap(idx[i], idx[j]);
            }
            idx.resize(options.max_entries);
        }
        for (auto i : idx) {
            double& v = p->value.data[i];
            double const saved = v;
            v = saved + options.step;
            double const up = loss();
            v = saved - options.step;
            double const down = loss();
            v = saved;
            double const numeric = (up - down) / (2.0 * options.step);
            double const analytic = p->grad.data[i];
            double const scale = std::max(std::abs(analytic), std::abs(numeric));
            if (scale <= options.magnitude_floor) {
                ++result.skipped;
                continue;
            }
            ++result.checked;
            double const rel = std::abs(analytic - numeric) / scale;
            if (rel > options.tolerance) ++result.failures;
            if (rel >= result.worst.relative_error) result.worst = {p->name, i, analytic, numeric, rel};
        }
    }
    return result;
}

ModelConfig toy_config(ModelKind kind, std::size_t max_buses, std::size_t max_branches) {
    ModelConfig c;
    c.kind = kind;
    switch (kind) {
        case ModelKind::ArmaGnn:
            c.pre_layers = {6};
            c.graph_layers = 2;
            c.graph_width = 5;
            c.stacks = 2;
            c.iterations = 3;
            c.post_layers = {6};
            break;
        case ModelKind::GcnStack:
            c.graph_layers = 3;
            c.graph_width = 6;
            break;
        case ModelKind::LocalMlp:
            c.hidden_layers = {7, 5};
            break;
        case ModelKind::GlobalMlp:
            c.bus_units = 6;
            c.branch_units = 5;
            c.hidden_layers = {7};
            c.max_buses = max_buses;
            c.max_branches = max_branches;
            break;
    }
    return c;
}

}  // namespace gridflow
