#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "gridflow/ac_solver.hpp"
#include "gridflow/error.hpp"
#include "gridflow/grid.hpp"
#include "test_support.hpp"

using namespace gridflow;
using gridflow::testing::bundled_case;
using gridflow::testing::random_grid;

namespace {

Grid two_bus(double r = 0.0, double x = 0.1, double b = 0.0) {
    Grid g;
    g.name = "two_bus";
    g.buses = {Bus{.id = 1, .type = BusType::Slack}, Bus{.id = 2, .type = BusType::PQ, .Pd = 1.0}};
    g.generators = {Generator{.bus_id = 1, .Pmax = 10.0, .Vg = 1.0}};
    g.branches = {Branch{.from_bus = 1, .to_bus = 2, .r = r, .x = x, .b = b}};
    g.reindex();
    return g;
}

// Dense assembly written out in rectangular arithmetic, independent of the
// library's branch_admittance helper.
std::vector<std::vector<Complex>> dense_ybus(Grid const& g) {
    std::size_t const n = g.n_buses();
    std::vector<std::vector<Complex>> y(n, std::vector<Complex>(n));
    for (std::size_t i = 0; i < n; ++i) y[i][i] += Complex(g.buses[i].Gs, g.buses[i].Bs);
    for (auto const& br : g.branches) {
        if (!br.in_service) continue;
        double const den = br.r * br.r + br.x * br.x;
        Complex const ys(br.r / den, -br.x / den);
        double const tau = br.tau == 0.0 ? 1.0 : br.tau;
        Complex const t(tau * std::cos(br.shift), tau * std::sin(br.shift));
        Complex const half_b(0.0, br.b / 2.0);
        auto const f = g.index_of(br.from_bus);
        auto const k = g.index_of(br.to_bus);
        y[f][f] += (ys + half_b) / (tau * tau);
        y[k][k] += ys + half_b;
        y[f][k] += -ys / std::conj(t);
        y[k][f] += -ys / t;
    }
    return y;
}

}  // namespace

TEST(BuildYbus, SinglePureReactanceLine) {
    auto const y = build_ybus(two_bus());
    EXPECT_NEAR(std::abs(y.at(0, 0) - Complex(0, -10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y.at(0, 1) - Complex(0, 10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y.at(1, 0) - Complex(0, 10)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y.at(1, 1) - Complex(0, -10)), 0.0, 1e-12);
}

TEST(BuildYbus, ShuntOnlyBus) {
    Grid g;
    g.buses = {Bus{.id = 1, .type = BusType::Slack, .Gs = 0.05, .Bs = 0.30}};
    g.reindex();
    auto const y = build_ybus(g);
    ASSERT_EQ(y.dimension, 1u);
    EXPECT_EQ(y.at(0, 0), Complex(0.05, 0.30));
}

TEST(BuildYbus, MatchesIndependentDenseAssemblyOnCase30) {
    Grid const g = bundled_case("case30");
    auto const y = build_ybus(g);
    auto const ref = dense_ybus(g);
    for (std::size_t i = 0; i < g.n_buses(); ++i) {
        for (std::size_t k = 0; k < g.n_buses(); ++k) EXPECT_LT(std::abs(y.at(i, k) - ref[i][k]), 1e-10);
    }
}

TEST(BuildYbus, MatchesIndependentAssemblyWithTransformers) {
    for (auto const* name : {"case14", "case57", "case300"}) {
        Grid const g = bundled_case(name);
        auto const y = build_ybus(g);
        auto const ref = dense_ybus(g);
        double worst = 0.0;
        for (std::size_t i = 0; i < g.n_buses(); ++i) {
            for (std::size_t k = 0; k < g.n_buses(); ++k) worst = std::max(worst, std::abs(y.at(i, k) - ref[i][k]));
        }
        EXPECT_LT(worst, 1e-9) << name;
    }
}

TEST(BuildYbus, ZeroReactanceIsRejected) {
    try {
        build_ybus(two_bus(0.0, 0.0));
        FAIL();
    } catch (Error const& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroReactance);
    }
}

TEST(BuildYbus, DanglingEndpointIsRejected) {
    Grid g = two_bus();
    g.branches[0].to_bus = 7;
    try {
        build_ybus(g);
        FAIL();
    } catch (Error const& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DanglingBranch);
    }
}

TEST(BuildYbus, OutOfServiceBranchContributesNothing) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Grid g = random_grid(rng);
        auto const before = build_ybus(g);
        Grid h = g;
        Branch extra = g.branches.front();
        extra.in_service = false;
        extra.x = 0.0;  // would be rejected if it were in service
        h.branches.push_back(extra);
        auto const after = build_ybus(h);
        for (std::size_t i = 0; i < g.n_buses(); ++i) {
            for (std::size_t k = 0; k < g.n_buses(); ++k) EXPECT_EQ(before.at(i, k), after.at(i, k));
        }
    }
}

TEST(BuildYbus, IsAdditiveOverBranchSets) {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        Grid g = random_grid(rng);
        Grid a = g, b = g;
        a.branches.clear();
        b.branches.clear();
        for (std::size_t k = 0; k < g.branches.size(); ++k) (k % 2 ? a : b).branches.push_back(g.branches[k]);
        for (auto& bus : b.buses) bus.Gs = bus.Bs = 0.0;  // shunts counted once
        auto const yg = build_ybus(g), ya = build_ybus(a), yb = build_ybus(b);
        for (std::size_t i = 0; i < g.n_buses(); ++i) {
            for (std::size_t k = 0; k < g.n_buses(); ++k) {
                EXPECT_LT(std::abs(yg.at(i, k) - ya.at(i, k) - yb.at(i, k)), 1e-12);
            }
        }
    }
}

TEST(BuildYbus, SymmetricWithoutTapsOrShifts) {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        Grid g = random_grid(rng);
        for (auto& br : g.branches) br.tau = br.shift = 0.0;
        auto const y = build_ybus(g);
        for (std::size_t i = 0; i < g.n_buses(); ++i) {
            for (std::size_t k = 0; k < g.n_buses(); ++k) EXPECT_EQ(y.at(i, k), y.at(k, i));
        }
    }
}

TEST(BusInjections, FlatUniformVoltageWithoutShuntsGivesZero) {
    Grid g = bundled_case("case9");
    for (auto& b : g.buses) b.Gs = b.Bs = 0.0;
    for (auto& br : g.branches) br.b = 0.0;
    std::vector<Complex> const V(g.n_buses(), Complex(1.0, 0.0));
    for (auto s : bus_injections(build_ybus(g), V)) EXPECT_LT(std::abs(s), 1e-12);
}

TEST(BusInjections, TwoBusHandEvaluation) {
    std::vector<Complex> const V = {std::polar(1.0, 0.0), std::polar(1.0, -0.1)};
    auto const s = bus_injections(build_ybus(two_bus()), V);
    EXPECT_NEAR(s[0].real(), 10.0 * std::sin(0.1), 1e-12);
    EXPECT_NEAR(s[0].real(), 0.9983, 1e-4);
    EXPECT_NEAR(s[1].real(), -10.0 * std::sin(0.1), 1e-12);
}

TEST(BusInjections, SingleShuntBus) {
    Grid g;
    g.buses = {Bus{.id = 1, .type = BusType::Slack, .Gs = 0.05, .Bs = 0.3}};
    g.reindex();
    std::vector<Complex> const V = {Complex(1.0, 0.0)};
    auto const s = bus_injections(build_ybus(g), V);
    EXPECT_NEAR(s[0].real(), 0.05, 1e-15);
    EXPECT_NEAR(s[0].imag(), -0.3, 1e-15);
}

TEST(BranchFlows, NoVoltageDifferenceMeansNoFlow) {
    std::vector<Complex> const V = {std::polar(1.02, 0.3), std::polar(1.02, 0.3)};
    auto const flows = branch_flows(two_bus(0.01, 0.1, 0.0), V);
    ASSERT_EQ(flows.size(), 1u);
    for (double q : flows[0]) EXPECT_NEAR(q, 0.0, 1e-14);
}

TEST(BranchFlows, TwoBusHandEvaluation) {
    std::vector<Complex> const V = {std::polar(1.0, 0.0), std::polar(1.0, -0.1)};
    auto const f = branch_flows(two_bus(), V)[0];
    double const p = 10.0 * std::sin(0.1);
    double const q = 10.0 * (1.0 - std::cos(0.1));
    EXPECT_NEAR(f[0], p, 1e-12);
    EXPECT_NEAR(f[4], -p, 1e-12);
    EXPECT_NEAR(f[1], q, 1e-12);
    EXPECT_NEAR(f[5], q, 1e-12);
    EXPECT_NEAR(f[1], 0.0500, 1e-4);
}

TEST(BranchFlows, Case9ConservationAtSolution) {
    Grid const g = bundled_case("case9");
    auto const sol = solve_nr(g);
    ASSERT_TRUE(sol.converged);
    double losses = 0.0;
    for (auto const& f : sol.flows) losses += f[0] + f[4];
    auto const pg = g.bus_generation();
    double gen = sol.slack_P + g.buses[g.slack_index()].Pd, load = 0.0, shunt = 0.0;
    for (std::size_t i = 0; i < g.n_buses(); ++i) {
        if (i != g.slack_index()) gen += pg[i];
        load += g.buses[i].Pd;
        shunt += g.buses[i].Gs * sol.Vm[i] * sol.Vm[i];
    }
    EXPECT_NEAR(losses, gen - load - shunt, 1e-8);
}

TEST(BranchFlows, ActivePowerBookkeepingForAnyVoltage) {
    Rng rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        Grid const g = random_grid(rng);
        std::vector<Complex> V;
        for (std::size_t i = 0; i < g.n_buses(); ++i) V.push_back(std::polar(rng.uniform(0.9, 1.1), rng.uniform(-0.5, 0.5)));
        auto const s = bus_injections(build_ybus(g), V);
        auto const flows = branch_flows(g, V);
        double total = 0.0, branches = 0.0, shunts = 0.0;
        for (auto x : s) total += x.real();
        for (auto const& f : flows) branches += f[0] + f[4];
        for (std::size_t i = 0; i < g.n_buses(); ++i) shunts += g.buses[i].Gs * std::norm(V[i]);
        EXPECT_NEAR(total, branches + shunts, 1e-9);
    }
}

TEST(BranchFlows, NonNegativeLossesOnPassiveBranches) {
    Rng rng(15);
    for (int trial = 0; trial < 200; ++trial) {
        Grid const g = random_grid(rng);
        std::vector<Complex> V;
        for (std::size_t i = 0; i < g.n_buses(); ++i) V.push_back(std::polar(rng.uniform(0.9, 1.1), rng.uniform(-0.5, 0.5)));
        for (auto const& f : branch_flows(g, V)) EXPECT_GE(f[0] + f[4], -1e-9);
    }
}

TEST(BranchFlows, PlainLineIsSymmetricUnderEndpointSwap) {
    Rng rng(16);
    for (int trial = 0; trial < 100; ++trial) {
        Grid g = two_bus(rng.uniform(0.0, 0.05), rng.uniform(0.02, 0.3), rng.uniform(0.0, 0.1));
        g.branches[0].tau = 1.0;
        std::vector<Complex> const V = {std::polar(rng.uniform(0.9, 1.1), rng.uniform(-0.3, 0.3)),
                                        std::polar(rng.uniform(0.9, 1.1), rng.uniform(-0.3, 0.3))};
        Grid h = g;
        std::swap(h.branches[0].from_bus, h.branches[0].to_bus);
        auto const a = branch_flows(g, V)[0];
        auto const b = branch_flows(h, V)[0];
        for (std::size_t q = 0; q < 4; ++q) {
            EXPECT_NEAR(a[q], b[q + 4], 1e-12);
            EXPECT_NEAR(a[q + 4], b[q], 1e-12);
        }
    }
}

TEST(Grid, MultipleGeneratorsSumPowerAndTakeFirstSetpoint) {
    Grid g = two_bus();
    g.generators.push_back(Generator{.bus_id = 1, .Pg = 0.5, .Vg = 1.05});
    g.generators[0].Pg = 0.25;
    g.generators[0].Vg = 1.01;
    auto const pg = g.bus_generation();
    auto const vg = g.bus_voltage_setpoint();
    EXPECT_DOUBLE_EQ(pg[0], 0.75);
    EXPECT_DOUBLE_EQ(vg[0], 1.01);
    EXPECT_DOUBLE_EQ(vg[1], 0.0);
}
