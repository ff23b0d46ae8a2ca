#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace gridflow {

/// Row-major dense square matrix.
struct DenseMatrix {
    std::size_t n = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t size) : n(size), data(size * size, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

/// LU factorization with partial (row) pivoting, PA = LU stored in place.
class DenseLU {
  public:
    /// Returns nullopt when a pivot is exactly zero or not finite.
    static std::optional<DenseLU> factor(DenseMatrix a);

    std::vector<double> solve(std::span<double const> rhs) const;
    std::size_t size() const { return lu_.n; }

  private:
    DenseMatrix lu_;
    std::vector<std::size_t> perm_;
};

}  // namespace gridflow
