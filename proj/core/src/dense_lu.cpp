#include "gridflow/dense_lu.hpp"

#include <cmath>
#include <utility>

#include "gridflow/error.hpp"

namespace gridflow {

std::optional<DenseLU> DenseLU::factor(DenseMatrix a) {
    std::size_t const n = a.n;
    DenseLU out;
    out.perm_.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.perm_[i] = i;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            double const v = std::abs(a(i, k));
            if (v > best) {
                best = v;
                pivot = i;
            }
        }
        if (best == 0.0 || !std::isfinite(best)) return std::nullopt;
        if (pivot != k) {
            std::swap_ranges(a.data.begin() + static_cast<std::ptrdiff_t>(k * n),
                             a.data.begin() + static_cast<std::ptrdiff_t>((k + 1) * n),
                             a.data.begin() + static_cast<std::ptrdiff_t>(pivot * n));
            std::swap(out.perm_[k], out.perm_[pivot]);
        }
        double const inv = 1.0 / a(k, k);
        double const* row_k = &a.data[k * n];
        for (std::size_t i = k + 1; i < n; ++i) {
            double* row_i = &a.data[i * n];
            double const factor = row_i[k] * inv;
            row_i[k] = factor;
            if (factor == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) row_i[j] -= factor * row_k[j];
        }
    }
    out.lu_ = std::move(a);
    return out;
}

std::vector<double> DenseLU::solve(std::span<double const> rhs) const {
    std::size_t const n = lu_.n;
    if (rhs.size() != n) throw Error(ErrorKind::DimensionMismatch, "rhs length does not match LU size");
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = rhs[perm_[i]];
    for (std::size_t i = 0; i < n; ++i) {
        double acc = x[i];
        for (std::size_t j = 0; j < i; ++j) acc -= lu_(i, j) * x[j];
        x[i] = acc;
    }
    for (std::size_t i = n; i-- > 0;) {
        double acc = x[i];
        for (std::size_t j = i + 1; j < n; ++j) acc -= lu_(i, j) * x[j];
        x[i] = acc / lu_(i, i);
    }
    return x;
}

}  // namespace gridflow
