#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gridflow/dc_solver.hpp"
#include "gridflow/error.hpp"
#include "test_support.hpp"

using namespace gridflow;
using gridflow::testing::bundled_case;
using gridflow::testing::random_grid;

namespace {

Grid two_bus(double x = 0.5, double pd = 1.0) {
    Grid g;
    g.buses = {Bus{.id = 1, .type = BusType::Slack}, Bus{.id = 2, .type = BusType::PQ, .Pd = pd}};
    g.generators = {Generator{.bus_id = 1, .Pmax = 10.0, .Vg = 1.0}};
    g.branches = {Branch{.from_bus = 1, .to_bus = 2, .x = x}};
    g.reindex();
    return g;
}

}  // namespace

TEST(SolveDc, TwoBusAnalytic) {
    auto const dc = solve_dc(two_bus());
    EXPECT_NEAR(dc.theta[0], 0.0, 1e-15);
    EXPECT_NEAR(dc.theta[1], -0.5, 1e-12);
    ASSERT_EQ(dc.flows.size(), 1u);
    EXPECT_NEAR(dc.flows[0][0], 1.0, 1e-12);
    EXPECT_NEAR(dc.flows[0][4], -1.0, 1e-12);
}

TEST(SolveDc, IdleGridHasNoFlow) {
    Grid g = bundled_case("case30");
    for (auto& b : g.buses) b.Pd = b.Qd = b.Gs = b.Bs = 0.0;
    for (auto& gen : g.generators) gen.Pg = 0.0;
    auto const dc = solve_dc(g);
    for (double t : dc.theta) EXPECT_NEAR(t, 0.0, 1e-12);
    for (auto const& f : dc.flows) EXPECT_NEAR(f[0], 0.0, 1e-12);
}

TEST(SolveDc, SlackKeepsReferenceAngle) {
    Grid const g = bundled_case("case118");
    auto const dc = solve_dc(g);
    EXPECT_EQ(dc.theta[g.slack_index()], g.buses[g.slack_index()].Va);
}

TEST(SolveDc, PhaseShiftActsThroughTheFlowFormula) {
    Grid g = two_bus(0.5, 0.0);
    g.branches.push_back(Branch{.from_bus = 1, .to_bus = 2, .x = 0.5, .tau = 1.0, .shift = 0.1});
    auto const dc = solve_dc(g);
    // circulating flow: both lines carry equal and opposite power
    EXPECT_NEAR(dc.flows[0][0] + dc.flows[1][0], 0.0, 1e-12);
    EXPECT_NEAR(dc.flows[1][0], (dc.theta[0] - dc.theta[1] - 0.1) / 0.5, 1e-12);
    EXPECT_GT(std::abs(dc.flows[0][0]), 0.05);
}

TEST(SolveDc, IslandIsSingular) {
    Grid g = two_bus();
    g.buses.push_back(Bus{.id = 3, .type = BusType::PQ, .Pd = 0.1});
    g.buses.push_back(Bus{.id = 4, .type = BusType::PQ});
    g.branches.push_back(Branch{.from_bus = 3, .to_bus = 4, .x = 0.1});
    g.reindex();
    try {
        solve_dc(g);
        FAIL();
    } catch (Error const& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularBMatrix);
    }
}

TEST(SolveDc, ZeroReactanceAndNoSlack) {
    EXPECT_THROW(solve_dc(two_bus(0.0)), Error);
    Grid g = two_bus();
    g.buses[0].type = BusType::PQ;
    try {
        solve_dc(g);
        FAIL();
    } catch (Error const& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoSlack);
    }
}

TEST(SolveDc, InjectionsBalanceAndFlowsAreAntisymmetric) {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        Grid const g = random_grid(rng);
        auto const dc = solve_dc(g);
        double const total = std::accumulate(dc.injections.begin(), dc.injections.end(), 0.0);
        EXPECT_NEAR(total, 0.0, 1e-9);
        for (auto const& f : dc.flows) EXPECT_EQ(f[0] + f[4], 0.0);
    }
}

TEST(SolveDc, AnglesScaleLinearlyWithInjections) {
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        Grid g = random_grid(rng);
        for (auto& br : g.branches) br.shift = 0.0;
        double const c = rng.uniform(0.2, 3.0);
        Grid h = g;
        for (auto& b : h.buses) b.Pd *= c, b.Gs *= c;
        for (auto& gen : h.generators) gen.Pg *= c;
        auto const a = solve_dc(g);
        auto const b = solve_dc(h);
        std::size_t const s = g.slack_index();
        for (std::size_t i = 0; i < g.n_buses(); ++i) {
            EXPECT_NEAR(b.theta[i] - b.theta[s], c * (a.theta[i] - a.theta[s]), 1e-9);
        }
    }
}

TEST(DcTargets, FlatAnglesWithoutChargingGiveZeros) {
    Grid g = bundled_case("case9");
    for (auto& br : g.branches) br.b = 0.0;
    DCSolution dc;
    dc.theta.assign(g.n_buses(), 0.0);
    for (auto const& row : dc_targets(g, dc)) {
        for (double v : row) EXPECT_NEAR(v, 0.0, 1e-12);
    }
}

TEST(DcTargets, RealCurrentMatchesPfToFirstOrder) {
    Grid const g = two_bus(0.5, 0.02);  // theta2 = -0.01
    auto const dc = solve_dc(g);
    ASSERT_NEAR(dc.theta[1], -0.01, 1e-12);
    auto const rec = dc_targets(g, dc)[0];
    EXPECT_NEAR(rec[2], dc.flows[0][0], 1e-4);
}

TEST(DcTargets, OneRowPerInServiceBranch) {
    Grid g = bundled_case("case14");
    g.branches[3].in_service = false;
    g.branches[4].in_service = false;
    EXPECT_EQ(dc_targets(g, solve_dc(g)).size(), g.branches.size() - 2);
}
