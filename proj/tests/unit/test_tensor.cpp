#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "gridflow/error.hpp"
#include "gridflow/tensor.hpp"

using namespace gridflow;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Tensor t(r, c);
    for (auto& v : t.data) v = rng.uniform(-scale, scale);
    return t;
}

SparseMatrix random_sparse(std::size_t n, Rng& rng, double density = 0.4) {
    std::vector<SparseMatrix::Entry> e;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (rng.canonical() < density) e.push_back({i, j, rng.uniform(-1.0, 1.0)});
        }
    }
    return SparseMatrix::from_entries(n, n, e);
}

double sum_weighted(Tensor const& y, Tensor const& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * w.data[i];
    return s;
}

// Central-difference gradient of a scalar function of `x`.
Tensor numeric_gradient(Tensor x, std::function<double(Tensor const&)> const& f, double h = 1e-6) {
    Tensor g(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double const saved = x.data[i];
        x.data[i] = saved + h;
        double const up = f(x);
        x.data[i] = saved - h;
        double const down = f(x);
        x.data[i] = saved;
        g.data[i] = (up - down) / (2 * h);
    }
    return g;
}

void expect_gradients_close(Tensor const& analytic, Tensor const& numeric, double tol) {
    ASSERT_TRUE(analytic.same_shape(numeric));
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        double const scale = std::max(std::abs(analytic.data[i]), std::abs(numeric.data[i]));
        if (scale <= 1e-8) continue;
        EXPECT_LT(std::abs(analytic.data[i] - numeric.data[i]) / scale, tol) << "entry " << i;
    }
}

}  // namespace

TEST(Spmm, IdentityLeavesInputUnchanged) {
    Rng rng(1);
    Tensor const x = random_tensor(6, 3, rng);
    EXPECT_EQ(spmm(SparseMatrix::identity(6), x), x);
}

TEST(Spmm, TriangleWithOnesGivesDegree) {
    auto const a = SparseMatrix::from_entries(3, 3, {{0, 1, 1}, {1, 0, 1}, {0, 2, 1}, {2, 0, 1}, {1, 2, 1}, {2, 1, 1}});
    Tensor const y = spmm(a, Tensor(3, 4, 1.0));
    for (double v : y.data) EXPECT_EQ(v, 2.0);
}

TEST(Spmm, AgreesWithDenseProduct) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        auto const a = random_sparse(5, rng);
        Tensor const x = random_tensor(5, 4, rng);
        Tensor const sparse = spmm(a, x);
        Tensor const dense = matmul(a.to_dense(), x);
        for (std::size_t i = 0; i < sparse.size(); ++i) EXPECT_NEAR(sparse.data[i], dense.data[i], 1e-12);
    }
}

TEST(Spmm, BackwardIsTransposeProduct) {
    Rng rng(3);
    auto const a = random_sparse(5, rng);
    Tensor const x = random_tensor(5, 3, rng);
    Tensor const w = random_tensor(5, 3, rng);
    Tensor const analytic = spmm_backward(a, w);
    Tensor const numeric = numeric_gradient(x, [&](Tensor const& t) { return sum_weighted(spmm(a, t), w); });
    expect_gradients_close(analytic, numeric, 1e-6);
}

TEST(Spmm, DimensionMismatch) {
    try {
        spmm(SparseMatrix::identity(3), Tensor(4, 2));
        FAIL();
    } catch (Error const& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
    EXPECT_THROW(matmul(Tensor(2, 3), Tensor(2, 3)), Error);
}

TEST(Matmul, TransposedVariantsAgree) {
    Rng rng(4);
    Tensor const a = random_tensor(4, 3, rng);
    Tensor const b = random_tensor(4, 5, rng);
    Tensor const c = random_tensor(6, 3, rng);
    Tensor at(3, 4), ct(3, 6);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) at(j, i) = a(i, j);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j) ct(j, i) = c(i, j);
    auto const tn = matmul_tn(a, b), ref_tn = matmul(at, b);
    auto const nt = matmul_nt(a, c), ref_nt = matmul(a, ct);
    for (std::size_t i = 0; i < tn.size(); ++i) EXPECT_NEAR(tn.data[i], ref_tn.data[i], 1e-14);
    for (std::size_t i = 0; i < nt.size(); ++i) EXPECT_NEAR(nt.data[i], ref_nt.data[i], 1e-14);
}

TEST(SparseMatrix, FromEntriesSumsDuplicatesAndSortsColumns) {
    auto const a = SparseMatrix::from_entries(2, 3, {{0, 2, 1.0}, {0, 0, 2.0}, {0, 2, 0.5}});
    EXPECT_EQ(a.columns, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(a.at(0, 2), 1.5);
    EXPECT_EQ(a.at(1, 1), 0.0);
}

TEST(BlockDiagonal, PlacesBlocksOnTheDiagonal) {
    auto const a = SparseMatrix::from_entries(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
    auto const b = SparseMatrix::identity(3);
    SparseMatrix const* blocks[] = {&a, &b};
    auto const d = block_diagonal(blocks);
    EXPECT_EQ(d.rows, 5u);
    EXPECT_EQ(d.at(0, 1), 1.0);
    EXPECT_EQ(d.at(2, 2), 1.0);
    EXPECT_EQ(d.at(1, 2), 0.0);
    EXPECT_EQ(d.nnz(), 5u);
}

TEST(LeakyRelu, Values) {
    Tensor const x(1, 2, std::vector<double>{2.0, -2.0});
    auto const y = leaky_relu(x, 0.2);
    EXPECT_EQ(y(0, 0), 2.0);
    EXPECT_NEAR(y(0, 1), -0.4, 1e-15);
}

TEST(LeakyRelu, UnitSlopeIsIdentity) {
    Rng rng(5);
    Tensor const x = random_tensor(4, 4, rng);
    EXPECT_EQ(leaky_relu(x, 1.0), x);
}

TEST(LeakyRelu, DerivativeAtZeroIsAlpha) {
    Tensor const x(1, 1, 0.0);
    EXPECT_EQ(leaky_relu_backward(x, Tensor(1, 1, 1.0), 0.2)(0, 0), 0.2);
}

TEST(LeakyRelu, Gradcheck) {
    Rng rng(6);
    Tensor const x = random_tensor(5, 4, rng);
    Tensor const w = random_tensor(5, 4, rng);
    Tensor const analytic = leaky_relu_backward(x, w, 0.2);
    Tensor const numeric = numeric_gradient(x, [&](Tensor const& t) { return sum_weighted(leaky_relu(t, 0.2), w); });
    expect_gradients_close(analytic, numeric, 1e-6);
}

TEST(Dense, IdentityWeightAndZeroBias) {
    Rng rng(7);
    Tensor const x = random_tensor(3, 4, rng);
    EXPECT_EQ(dense_forward(x, Tensor::identity(4), Tensor(1, 4)), x);
}

TEST(Dense, ScalarCase) {
    auto const y = dense_forward(Tensor(1, 1, 3.0), Tensor(1, 1, 2.0), Tensor(1, 1, 1.0));
    EXPECT_EQ(y(0, 0), 7.0);
}

TEST(Dense, GradcheckAllThree) {
    Rng rng(8);
    Tensor const x = random_tensor(4, 3, rng), w = random_tensor(3, 5, rng), b = random_tensor(1, 5, rng);
    Tensor const g = random_tensor(4, 5, rng);
    auto const grads = dense_backward(x, w, g);
    expect_gradients_close(grads.dx, numeric_gradient(x, [&](Tensor const& t) { return sum_weighted(dense_forward(t, w, b), g); }), 1e-5);
    expect_gradients_close(grads.dw, numeric_gradient(w, [&](Tensor const& t) { return sum_weighted(dense_forward(x, t, b), g); }), 1e-5);
    expect_gradients_close(grads.db, numeric_gradient(b, [&](Tensor const& t) { return sum_weighted(dense_forward(x, w, t), g); }), 1e-5);
}

TEST(Mse, Values) {
    Rng rng(9);
    Tensor const t = random_tensor(3, 3, rng);
    EXPECT_EQ(mse_loss(t, t), 0.0);
    Tensor p = t;
    for (auto& v : p.data) v += 1.0;
    EXPECT_NEAR(mse_loss(p, t), 1.0, 1e-15);
    EXPECT_THROW(mse_loss(Tensor(2, 2), Tensor(2, 3)), Error);
}

TEST(Mse, Gradcheck) {
    Rng rng(10);
    Tensor const p = random_tensor(4, 3, rng), t = random_tensor(4, 3, rng);
    expect_gradients_close(mse_grad(p, t), numeric_gradient(p, [&](Tensor const& x) { return mse_loss(x, t); }), 1e-6);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    Parameter p("w", Tensor(1, 3, std::vector<double>{0.0, 1.0, -1.0}));
    p.grad = Tensor(1, 3, std::vector<double>{2.0, -0.5, 1e-3});
    AdamState adam;
    Parameter* params[] = {&p};
    adam.step(params);
    EXPECT_NEAR(p.value(0, 0), -1e-3, 1e-6);
    EXPECT_NEAR(p.value(0, 1), 1.0 + 1e-3, 1e-6);
    EXPECT_NEAR(p.value(0, 2), -1.0 - 1e-3, 1e-4);
}

TEST(Adam, ZeroGradientLeavesParametersButCountsTheStep) {
    Parameter p("w", Tensor(2, 2, 0.5));
    AdamState adam;
    Parameter* params[] = {&p};
    adam.step(params);
    EXPECT_EQ(p.value, Tensor(2, 2, 0.5));
    EXPECT_EQ(adam.step_count(), 1);
}

TEST(Adam, ConvergesOnAScalarQuadratic) {
    Parameter p("w", Tensor(1, 1, 0.0));
    AdamState adam(AdamOptions{.lr = 0.1});
    Parameter* params[] = {&p};
    double first_loss = 9.0, loss = 9.0;
    for (int i = 0; i < 100; ++i) {
        double const w = p.value(0, 0);
        loss = (w - 3.0) * (w - 3.0);
        p.grad(0, 0) = 2.0 * (w - 3.0);
        adam.step(params);
    }
    EXPECT_LT(std::abs(p.value(0, 0) - 3.0), 0.5);
    EXPECT_LT(loss, first_loss);
}

TEST(Adam, ShapeChangeIsRejected) {
    Parameter p("w", Tensor(1, 2));
    AdamState adam;
    Parameter* params[] = {&p};
    adam.step(params);
    p = Parameter("w", Tensor(2, 2));
    try {
        adam.step(params);
        FAIL();
    } catch (Error const& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    }
}

TEST(Glorot, BoundsDeterminismAndVariance) {
    Rng a(42), b(42);
    Tensor const x = glorot_uniform(30, 20, a);
    EXPECT_EQ(x, glorot_uniform(30, 20, b));
    double const bound = std::sqrt(6.0 / 50.0);
    for (double v : x.data) EXPECT_LE(std::abs(v), bound);

    Rng c(7);
    Tensor const big = glorot_uniform(400, 250, c);  // 10^5 draws
    double mean = 0.0, var = 0.0;
    for (double v : big.data) mean += v;
    mean /= static_cast<double>(big.size());
    for (double v : big.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(big.size() - 1);
    double const expected = 2.0 / 650.0;
    EXPECT_NEAR(var, expected, 0.1 * expected);
}
