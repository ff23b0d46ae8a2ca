#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridflow/random.hpp"

namespace gridflow {

/// Row-major dense matrix of doubles.
struct Tensor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
    Tensor(std::size_t r, std::size_t c, std::vector<double> values);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<double const> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool same_shape(Tensor const& o) const { return rows == o.rows && cols == o.cols; }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    static Tensor identity(std::size_t n);

    friend bool operator==(Tensor const&, Tensor const&) = default;
};

/// Compressed-row sparse matrix, column indices sorted within each row.
struct SparseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_offsets{0};
    std::vector<std::size_t> columns;
    std::vector<double> values;

    struct Entry {
        std::size_t row;
        std::size_t col;
        double value;
    };

    /// Duplicate (row, col) entries are summed.
    static SparseMatrix from_entries(std::size_t rows, std::size_t cols, std::vector<Entry> entries);
    static SparseMatrix identity(std::size_t n);

    std::size_t nnz() const { return columns.size(); }
    double at(std::size_t i, std::size_t j) const;
    bool is_symmetric() const;
    SparseMatrix transposed() const;
    Tensor to_dense() const;

    friend bool operator==(SparseMatrix const&, SparseMatrix const&) = default;
};

/// Block-diagonal stacking, used to batch graphs as a disjoint union.
SparseMatrix block_diagonal(std::span<SparseMatrix const* const> blocks);

// Products. Shapes are checked; Error(DimensionMismatch) on disagreement.
Tensor matmul(Tensor const& a, Tensor const& b);     // a b
Tensor matmul_tn(Tensor const& a, Tensor const& b);  // a^T b
Tensor matmul_nt(Tensor const& a, Tensor const& b);  // a b^T
Tensor spmm(SparseMatrix const& a, Tensor const& x);
/// Backward of spmm w.r.t. x: a^T grad.
Tensor spmm_backward(SparseMatrix const& a, Tensor const& grad);

void add_inplace(Tensor& acc, Tensor const& x);
void scale_inplace(Tensor& t, double s);
Tensor add(Tensor const& a, Tensor const& b);
/// Column sums, returned as a 1 x cols tensor.
Tensor column_sums(Tensor const& t);

Tensor leaky_relu(Tensor const& x, double alpha);
/// grad * d/dx leaky_relu(x); the derivative at x = 0 is alpha.
Tensor leaky_relu_backward(Tensor const& x, Tensor const& grad, double alpha);

/// x W + b, with b (1 x out) broadcast over rows.
Tensor dense_forward(Tensor const& x, Tensor const& w, Tensor const& b);

struct DenseGrads {
    Tensor dx;
    Tensor dw;
    Tensor db;
};
DenseGrads dense_backward(Tensor const& x, Tensor const& w, Tensor const& grad);

/// Mean over all elements of (pred - target)^2.
double mse_loss(Tensor const& pred, Tensor const& target);
/// 2 (pred - target) / count.
Tensor mse_grad(Tensor const& pred, Tensor const& target);

/// A trainable tensor and its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Parameter(std::string n = {}, Tensor v = {}) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor(value.rows, value.cols);
    }
    void zero_grad() { grad.fill(0.0); }
};

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
};

/// Bias-corrected Adam moments for an ordered list of parameters.
class AdamState {
  public:
    explicit AdamState(AdamOptions options = {}) : options_(options) {}

    /// Applies one update using each parameter's grad. The first call fixes the
    /// parameter shapes; later calls with different shapes throw ShapeMismatch.
    void step(std::span<Parameter*> params);

    long step_count() const { return t_; }
    AdamOptions const& options() const { return options_; }

  private:
    AdamOptions options_;
    long t_ = 0;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)), fan_in = rows, fan_out = cols.
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace gridflow
