#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gridflow/dc_solver.hpp"
#include "gridflow/error.hpp"
#include "gridflow/metrics.hpp"
#include "test_support.hpp"

using namespace gridflow;
using gridflow::testing::bundled_case;

namespace {

Tensor random_targets(std::size_t rows, Rng& rng) {
    Tensor t(rows, kTargetWidth);
    for (auto& v : t.data) v = rng.uniform(-2.0, 2.0);
    return t;
}

// Direct evaluation: per column sqrt(mean sq error / sample variance), then the column mean.
double reference_nrmse(Tensor const& y, Tensor const& p) {
    double total = 0.0;
    for (std::size_t c = 0; c < y.cols; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < y.rows; ++i) mean += y(i, c);
        mean /= static_cast<double>(y.rows);
        double var = 0.0, mse = 0.0;
        for (std::size_t i = 0; i < y.rows; ++i) {
            var += (y(i, c) - mean) * (y(i, c) - mean);
            mse += (y(i, c) - p(i, c)) * (y(i, c) - p(i, c));
        }
        var /= static_cast<double>(y.rows - 1);
        mse /= static_cast<double>(y.rows);
        total += std::sqrt(mse / var);
    }
    return total / static_cast<double>(y.cols);
}

}  // namespace

TEST(Nrmse, PerfectPredictionIsZero) {
    Rng rng(1);
    Tensor const y = random_targets(50, rng);
    auto const r = nrmse(y, y);
    EXPECT_EQ(r.nrmse, 0.0);
    EXPECT_EQ(r.n_rows, 50u);
}

TEST(Nrmse, ColumnMeanPredictorApproachesOne) {
    Rng rng(2);
    std::size_t const n = 1000;
    Tensor const y = random_targets(n, rng);
    Tensor p(n, kTargetWidth);
    for (std::size_t c = 0; c < kTargetWidth; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) p(i, c) = mean;
    }
    auto const r = nrmse(y, p);
    double const expected = std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n));
    for (double f : r.per_feature) EXPECT_NEAR(f, expected, 1e-12);
    EXPECT_NEAR(r.nrmse, expected, 1e-12);
}

TEST(Nrmse, AgreesWithDirectEvaluation) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        auto const n = static_cast<std::size_t>(rng.uniform_int(2, 40));
        Tensor const y = random_targets(n, rng), p = random_targets(n, rng);
        EXPECT_NEAR(nrmse(y, p).nrmse, reference_nrmse(y, p), 1e-12);
    }
}

TEST(Nrmse, InvariantToPerColumnAffineRescaling) {
    Rng rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        auto const n = static_cast<std::size_t>(rng.uniform_int(3, 30));
        Tensor y = random_targets(n, rng), p = random_targets(n, rng);
        double const base = nrmse(y, p).nrmse;
        for (std::size_t c = 0; c < kTargetWidth; ++c) {
            double const scale = rng.uniform(0.01, 100.0) * (rng.canonical() < 0.5 ? -1.0 : 1.0);
            double const shift = rng.uniform(-10.0, 10.0);
            for (std::size_t i = 0; i < n; ++i) {
                y(i, c) = scale * y(i, c) + shift;
                p(i, c) = scale * p(i, c) + shift;
            }
        }
        ASSERT_NEAR(nrmse(y, p).nrmse, base, 1e-9 * (1.0 + base)) << "trial " << trial;
    }
}

TEST(Nrmse, Errors) {
    Tensor const y(4, kTargetWidth, 1.0);
    try {
        nrmse(y, y);
        FAIL();
    } catch (Error const& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroVariance);
    }
    EXPECT_THROW(nrmse(Tensor(4, kTargetWidth), Tensor(5, kTargetWidth)), Error);
}

TEST(CosineDistance, Examples) {
    std::vector<double> const u{1.0, 2.0, 3.0}, neg{-1.0, -2.0, -3.0};
    EXPECT_NEAR(cosine_distance(u, u), 0.0, 1e-15);
    EXPECT_NEAR(cosine_distance(u, neg), 2.0, 1e-15);
    std::vector<double> const a{1.0, 0.0}, b{0.0, 5.0};
    EXPECT_NEAR(cosine_distance(a, b), 1.0, 1e-15);
    std::vector<double> const zero{0.0, 0.0};
    try {
        cosine_distance(a, zero);
        FAIL();
    } catch (Error const& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroVector);
    }
}

TEST(CosineDistance, RangeAndPositiveScaling) {
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> u(8), v(8);
        for (auto& x : u) x = rng.uniform(-1.0, 1.0);
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        double const d = cosine_distance(u, v);
        ASSERT_GE(d, 0.0);
        ASSERT_LE(d, 2.0);
        ASSERT_NEAR(cosine_distance(v, u), d, 1e-15);
        double const s = rng.uniform(0.001, 1000.0);
        std::vector<double> su = u;
        for (auto& x : su) x *= s;
        ASSERT_NEAR(cosine_distance(su, v), d, 1e-12);
    }
}

TEST(Smoothness, ConstantMeanPredictorIsZero) {
    Grid const ref = bundled_case("case9");
    Grid const grids[] = {ref};
    SamplerConfig c;
    c.n_samples = 12;
    c.threads = 1;
    Dataset const ds = generate_dataset(grids, c);
    auto const samples = ds.select(Split::Test);
    std::vector<double> mean(kTargetWidth, 0.0);
    std::size_t rows = 0;
    for (auto const* s : samples) {
        for (std::size_t v = 0; v < s->n_vertices(); ++v, ++rows)
            for (std::size_t k = 0; k < kTargetWidth; ++k) mean[k] += (*s->targets)(v, k);
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    std::vector<Tensor> preds;
    for (auto const* s : samples) {
        Tensor p(s->n_vertices(), kTargetWidth);
        for (std::size_t v = 0; v < p.rows; ++v)
            for (std::size_t k = 0; k < kTargetWidth; ++k) p(v, k) = mean[k];
        preds.push_back(p);
    }
    auto const r = smoothness_report(preds, samples);
    ASSERT_EQ(r.prediction.size(), 9u);
    for (double d : r.prediction) EXPECT_NEAR(d, 0.0, 1e-12);
    EXPECT_GT(r.label_mean(), 0.0);

    std::vector<Tensor> labels;
    for (auto const* s : samples) labels.push_back(*s->targets);
    auto const same = smoothness_report(labels, samples);
    EXPECT_EQ(same.prediction, same.label);
}

TEST(Smoothness, ZeroFlowVertexIsLeftOut) {
    Grid const g = bundled_case("case9");
    auto const sol = solve_nr(g);
    auto s = make_sample(g, &sol, g);
    for (std::size_t k = 0; k < kTargetWidth; ++k) (*s.targets)(2, k) = 0.0;
    LineGraphSample const* one[] = {&s};
    Tensor pred = *s.targets;
    for (std::size_t k = 0; k < kTargetWidth; ++k) pred(4, k) = 1e-300;
    std::vector<Tensor> const preds{pred};
    auto const r = smoothness_report(preds, one);
    EXPECT_TRUE(std::isnan(r.label[2]));
    EXPECT_TRUE(std::isnan(r.prediction[2]));
    EXPECT_TRUE(std::isnan(r.prediction[4]));
    EXPECT_FALSE(std::isnan(r.label[4]));
    double sum = 0.0;
    for (std::size_t v : {0, 1, 3, 5, 6, 7, 8}) sum += r.label[v];
    EXPECT_NEAR(r.label_mean(), sum / 7.0, 1e-15);
    EXPECT_NEAR(r.prediction_mean(), r.label_mean(), 1e-15);
}

TEST(Smoothness, MixedTopologyIsRejected) {
    Grid const a = bundled_case("case9"), b = bundled_case("case14");
    auto const pa = solve_nr(a), pb = solve_nr(b);
    auto const sa = make_sample(a, &pa, a);
    auto const sb = make_sample(b, &pb, b);
    LineGraphSample const* both[] = {&sa, &sb};
    std::vector<Tensor> preds{Tensor(9, 8, 1.0), Tensor(20, 8, 1.0)};
    try {
        smoothness_report(preds, both);
        FAIL();
    } catch (Error const& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MixedTopology);
    }
}

TEST(DcPredictions, MatchTheDcSolverOnTheSourceGrid) {
    Grid const g = bundled_case("case30");
    auto const sol = solve_nr(g);
    auto const s = make_sample(g, &sol, g);
    Tensor const p = dc_predictions(s);
    auto const expected = dc_targets(g, solve_dc(g));
    ASSERT_EQ(p.rows, expected.size());
    for (std::size_t v = 0; v < p.rows; ++v)
        for (std::size_t k = 0; k < kTargetWidth; ++k) EXPECT_NEAR(p(v, k), expected[v][k], 1e-10);
}

TEST(Reports, CsvAndJsonCarryEveryFeature) {
    Rng rng(6);
    Tensor const y = random_targets(20, rng), p = random_targets(20, rng);
    auto r = nrmse(y, p);
    r.model_id = "m";
    r.dataset_id = "d";
    auto const csv = eval_report_csv(r);
    for (auto const* name : {"Pf", "Qf", "If_re", "If_im", "Pt", "Qt", "It_re", "It_im"}) {
        EXPECT_NE(csv.find(name), std::string::npos) << name;
    }
    auto const j = nlohmann::json::parse(eval_report_json(r));
    EXPECT_NEAR(j.at("nrmse").get<double>(), r.nrmse, 1e-15);
}
