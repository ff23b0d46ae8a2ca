#include "gridflow/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "gridflow/error.hpp"

namespace gridflow {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<RowMajor const>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(Tensor const& t) { return ConstMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }
MutMap view(Tensor& t) { return MutMap(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }

[[noreturn]] void shape_error(char const* op, Tensor const& a, Tensor const& b) {
    throw Error(ErrorKind::DimensionMismatch, std::string(op) + ": " + std::to_string(a.rows) + "x" +
                                                  std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                                                  std::to_string(b.cols));
}

}  // namespace

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw Error(ErrorKind::DimensionMismatch, "tensor data length does not match shape");
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

SparseMatrix SparseMatrix::from_entries(std::size_t rows, std::size_t cols, std::vector<Entry> entries) {
    for (auto const& e : entries) {
        if (e.row >= rows || e.col >= cols) throw Error(ErrorKind::DimensionMismatch, "sparse entry out of range");
    }
    std::sort(entries.begin(), entries.end(),
              [](Entry const& a, Entry const& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    SparseMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_offsets.assign(rows + 1, 0);
    for (std::size_t p = 0; p < entries.size();) {
        auto const r = entries[p].row;
        auto const c = entries[p].col;
        double sum = 0.0;
        for (; p < entries.size() && entries[p].row == r && entries[p].col == c; ++p) sum += entries[p].value;
        m.columns.push_back(c);
        m.values.push_back(sum);
        ++m.row_offsets[r + 1];
    }
    for (std::size_t i = 0; i < rows; ++i) m.row_offsets[i + 1] += m.row_offsets[i];
    return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<Entry> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) entries.push_back({i, i, 1.0});
    return from_entries(n, n, std::move(entries));
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
    auto first = columns.begin() + static_cast<std::ptrdiff_t>(row_offsets[i]);
    auto last = columns.begin() + static_cast<std::ptrdiff_t>(row_offsets[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return values[static_cast<std::size_t>(it - columns.begin())];
}

bool SparseMatrix::is_symmetric() const {
    if (rows != cols) return false;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p) {
            if (at(columns[p], i) != values[p]) return false;
        }
    }
    return true;
}

SparseMatrix SparseMatrix::transposed() const {
    std::vector<Entry> entries;
    entries.reserve(nnz());
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p) entries.push_back({columns[p], i, values[p]});
    }
    return from_entries(cols, rows, std::move(entries));
}

Tensor SparseMatrix::to_dense() const {
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t p = row_offsets[i]; p < row_offsets[i + 1]; ++p) t(i, columns[p]) += values[p];
    }
    return t;
}

SparseMatrix block_diagonal(std::span<SparseMatrix const* const> blocks) {
    SparseMatrix out;
    out.row_offsets.clear();
    out.row_offsets.push_back(0);
    for (auto const* block : blocks) {
        std::size_t const base_col = out.cols;
        for (std::size_t i = 0; i < block->rows; ++i) {
            for (std::size_t p = block->row_offsets[i]; p < block->row_offsets[i + 1]; ++p) {
                out.columns.push_back(base_col + block->columns[p]);
                out.values.push_back(block->values[p]);
            }
            out.row_offsets.push_back(out.columns.size());
        }
        out.rows += block->rows;
        out.cols += block->cols;
    }
    return out;
}

Tensor matmul(Tensor const& a, Tensor const& b) {
    if (a.cols != b.rows) shape_error("matmul", a, b);
    Tensor out(a.rows, b.cols);
    view(out).noalias() = view(a) * view(b);
    return out;
}

Tensor matmul_tn(Tensor const& a, Tensor const& b) {
    if (a.rows != b.rows) shape_error("matmul_tn", a, b);
    Tensor out(a.cols, b.cols);
    view(out).noalias() = view(a).transpose() * view(b);
    return out;
}

Tensor matmul_nt(Tensor const& a, Tensor const& b) {
    if (a.cols != b.cols) shape_error("matmul_nt", a, b);
    Tensor out(a.rows, b.rows);
    view(out).noalias() = view(a) * view(b).transpose();
    return out;
}

Tensor spmm(SparseMatrix const& a, Tensor const& x) {
    if (a.cols != x.rows) {
        throw Error(ErrorKind::DimensionMismatch, "spmm: sparse " + std::to_string(a.rows) + "x" +
                                                      std::to_string(a.cols) + " vs dense " + std::to_string(x.rows) +
                                                      "x" + std::to_string(x.cols));
    }
    Tensor out(a.rows, x.cols);
    std::size_t const f = x.cols;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* dst = out.data.data() + i * f;
        for (std::size_t p = a.row_offsets[i]; p < a.row_offsets[i + 1]; ++p) {
            double const w = a.values[p];
            double const* src = x.data.data() + a.columns[p] * f;
            for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
        }
    }
    return out;
}

Tensor spmm_backward(SparseMatrix const& a, Tensor const& grad) {
    if (a.rows != grad.rows) throw Error(ErrorKind::DimensionMismatch, "spmm_backward: row count");
    Tensor out(a.cols, grad.cols);
    std::size_t const f = grad.cols;
    // scatter form of a^T grad, rows visited in fixed order
    for (std::size_t i = 0; i < a.rows; ++i) {
        double const* src = grad.data.data() + i * f;
        for (std::size_t p = a.row_offsets[i]; p < a.row_offsets[i + 1]; ++p) {
            double const w = a.values[p];
            double* dst = out.data.data() + a.columns[p] * f;
            for (std::size_t j = 0; j < f; ++j) dst[j] += w * src[j];
        }
    }
    return out;
}

void add_inplace(Tensor& acc, Tensor const& x) {
    if (!acc.same_shape(x)) shape_error("add", acc, x);
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += x.data[i];
}

void scale_inplace(Tensor& t, double s) {
    for (auto& v : t.data) v *= s;
}

Tensor add(Tensor const& a, Tensor const& b) {
    Tensor out = a;
    add_inplace(out, b);
    return out;
}

Tensor column_sums(Tensor const& t) {
    Tensor out(1, t.cols);
    for (std::size_t i = 0; i < t.rows; ++i) {
        for (std::size_t j = 0; j < t.cols; ++j) out.data[j] += t(i, j);
    }
    return out;
}

Tensor leaky_relu(Tensor const& x, double alpha) {
    Tensor out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        double const v = x.data[i];
        out.data[i] = v > 0.0 ? v : alpha * v;
    }
    return out;
}

Tensor leaky_relu_backward(Tensor const& x, Tensor const& grad, double alpha) {
    if (!x.same_shape(grad)) shape_error("leaky_relu_backward", x, grad);
    Tensor out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        out.data[i] = x.data[i] > 0.0 ? grad.data[i] : alpha * grad.data[i];
    }
    return out;
}

Tensor dense_forward(Tensor const& x, Tensor const& w, Tensor const& b) {
    if (b.rows != 1 || b.cols != w.cols) shape_error("dense bias", w, b);
    Tensor out = matmul(x, w);
    for (std::size_t i = 0; i < out.rows; ++i) {
        double* row = out.data.data() + i * out.cols;
        for (std::size_t j = 0; j < out.cols; ++j) row[j] += b.data[j];
    }
    return out;
}

DenseGrads dense_backward(Tensor const& x, Tensor const& w, Tensor const& grad) {
    if (grad.rows != x.rows || grad.cols != w.cols) shape_error("dense_backward", x, grad);
    return {matmul_nt(grad, w), matmul_tn(x, grad), column_sums(grad)};
}

double mse_loss(Tensor const& pred, Tensor const& target) {
    if (!pred.same_shape(target)) shape_error("mse_loss", pred, target);
    if (pred.data.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        double const d = pred.data[i] - target.data[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.data.size());
}

Tensor mse_grad(Tensor const& pred, Tensor const& target) {
    if (!pred.same_shape(target)) shape_error("mse_grad", pred, target);
    Tensor out(pred.rows, pred.cols);
    double const scale = pred.data.empty() ? 0.0 : 2.0 / static_cast<double>(pred.data.size());
    for (std::size_t i = 0; i < pred.data.size(); ++i) out.data[i] = scale * (pred.data[i] - target.data[i]);
    return out;
}

void AdamState::step(std::span<Parameter*> params) {
    if (m_.empty()) {
        for (auto const* p : params) {
            m_.emplace_back(p->value.rows, p->value.cols);
            v_.emplace_back(p->value.rows, p->value.cols);
        }
    }
    if (m_.size() != params.size()) throw Error(ErrorKind::ShapeMismatch, "parameter count changed");
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k]->value.same_shape(m_[k]) || !params[k]->grad.same_shape(m_[k])) {
            throw Error(ErrorKind::ShapeMismatch, "parameter '" + params[k]->name + "' changed shape");
        }
    }
    ++t_;
    double const b1 = options_.beta1;
    double const b2 = options_.beta2;
    double const c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    double const c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& value = params[k]->value.data;
        auto const& grad = params[k]->grad.data;
        auto& m = m_[k].data;
        auto& v = v_[k].data;
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            double const m_hat = m[i] / c1;
            double const v_hat = v[i] / c2;
            value[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
        }
    }
}

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    if (rows == 0 || cols == 0) throw Error(ErrorKind::InvalidArgument, "glorot_uniform: empty shape");
    double const limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t(rows, cols);
    for (auto& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

}  // namespace gridflow
