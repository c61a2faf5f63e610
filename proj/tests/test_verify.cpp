#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dvfp/rates.hpp"
#include "dvfp/verify.hpp"

using namespace dvfp;

TEST(HalanayCompare, NoMemoryIsExponential) {
    const DecayTrace tr = halanay_compare_solve(1.5, 0.0, 0.5, 2.0, 0.0, 5.0, 1e-3);
    for (std::size_t k = 0; k < tr.size(); k += 100) EXPECT_NEAR(tr.value(k), 2.0 * std::exp(-1.5 * tr.time(k)), 1e-6);
}

TEST(HalanayCompare, ExponentialHistoryGivesExactSolution) {
    const double a = 2.0, b = 1.0, H = 1.0;
    const double l = halanay_rate(a, b, H);
    const DecayTrace tr = halanay_compare_solve(a, b, H, 1.0, 0.0, 10.0, 1e-3, exponential_history(1.0, 0.0, l));
    for (std::size_t k = 0; k < tr.size(); k += 50) {
        EXPECT_NEAR(tr.value(k) / std::exp(-l * tr.time(k)), 1.0, 1e-5) << tr.time(k);
    }
}

TEST(HalanayCompare, ConstantHistoryBelowExponential) {
    const double a = 2.0, b = 1.0, H = 1.0;
    const double l = halanay_rate(a, b, H);
    const DecayTrace tr = halanay_compare_solve(a, b, H, 1.0, 0.0, 20.0, 1e-3);
    for (std::size_t k = 1; k < tr.size(); ++k) {
        EXPECT_LE(tr.value(k), tr.value(k - 1));
        EXPECT_LE(tr.value(k), std::exp(-l * tr.time(k)) * (1.0 + 1e-6));
    }
}

TEST(HalanayCompare, SecondOrderInStep) {
    const double a = 2.0, b = 1.0, H = 1.0;
    const double l = halanay_rate(a, b, H);
    std::vector<double> err;
    for (double dt : {0.02, 0.01, 0.005}) {
        const DecayTrace tr = halanay_compare_solve(a, b, H, 1.0, 0.0, 4.0, dt, exponential_history(1.0, 0.0, l));
        err.push_back(std::abs(tr.value(tr.size() - 1) - std::exp(-4.0 * l)));
    }
    EXPECT_GE(std::log2(err[0] / err[1]), 0.9);
    EXPECT_GE(std::log2(err[1] / err[2]), 0.9);
}

TEST(HalanayCompare, Errors) {
    EXPECT_THROW(halanay_compare_solve(1.0, 0.5, 0.01, 1.0, 0.0, 1.0, 0.1), InvalidInput);
    EXPECT_THROW(halanay_compare_solve(1.0, 0.5, infinity, 1.0, 0.0, 1.0, 0.1), InvalidInput);
    EXPECT_THROW(halanay_compare_solve(0.0, 0.5, 1.0, 1.0, 0.0, 1.0, 0.1), InvalidInput);
}

TEST(CheckInequality, ZeroTrace) {
    DecayTrace z("J");
    for (int k = 0; k <= 100; ++k) z.push(0.1 * k, 0.0);
    const InequalityReport r = check_inequality(z, 0.3, 0.1, 1.0);
    EXPECT_EQ(r.checked, 99u);
    EXPECT_EQ(r.violations, 0u);
}

TEST(CheckInequality, PureExponentialSatisfiesIt) {
    // J = e^{-lambda1 t} has dJ/dt + lambda1 J = 0 <= lambda2 * memory.
    for (double H : {0.0, 0.5, infinity}) {
        DecayTrace j("J");
        for (int k = 0; k <= 2000; ++k) j.push(0.005 * k, std::exp(-0.3 * 0.005 * k));
        InequalityOptions opt;
        opt.slack_abs = 1e-5;
        EXPECT_EQ(check_inequality(j, 0.3, 0.1, H, {}, opt).violations, 0u) << H;
        opt.sup_form = true;
        EXPECT_EQ(check_inequality(j, 0.3, 0.1, H, {}, opt).violations, 0u) << H;
    }
}

TEST(CheckInequality, DetectsSlowDecay) {
    DecayTrace j("J");
    for (int k = 0; k <= 200; ++k) j.push(0.05 * k, std::exp(-0.01 * 0.05 * k));
    const InequalityReport r = check_inequality(j, 1.0, 0.1, 1.0);
    EXPECT_EQ(r.violations, r.checked);
    EXPECT_GT(r.max_excess, 0.5);
}

TEST(CheckInequality, MemoryAverageMatchesDirectIntegral) {
    // Residual for J = 1 + t at t = 3 with H = 1: 1 + l1 * 4 - l2 * 3.5.
    DecayTrace j("J");
    for (int k = 0; k <= 60; ++k) j.push(0.1 * k, 1.0 + 0.1 * k);
    const auto cum = detail::cumulative_trapezoid(j);
    EXPECT_NEAR(detail::inequality_residual(j, cum, 30, 0.5, 0.25, 1.0, false), 1.0 + 2.0 - 0.875, 1e-12);
    EXPECT_NEAR(detail::inequality_residual(j, cum, 30, 0.5, 0.25, 1.0, true), 1.0 + 2.0 - 1.0, 1e-12);
    // H = inf averages over [0, 3]
    EXPECT_NEAR(detail::inequality_residual(j, cum, 30, 0.5, 0.25, infinity, false), 1.0 + 2.0 - 0.625, 1e-12);
}

TEST(CheckInequality, Errors) {
    DecayTrace j("J", {0.0, 1.0}, {1.0, 0.5});
    EXPECT_THROW(check_inequality(j, 1.0, 0.1, 1.0), InvalidInput);
    DecayTrace k("J", {0.0, 1.0, 2.0}, {1.0, 0.5, 0.2});
    DecayTrace b("b", {0.0, 1.0}, {1.0, 0.5});
    EXPECT_THROW(check_inequality(k, 1.0, 0.1, 1.0, {b, b}), InvalidInput);
}

namespace {

DriftModel quadratic_model(double c, double H) {
    PotentialSpec s;
    s.dimension = 1;
    s.interaction = c > 0.0 ? "quadratic" : "none";
    s.interaction_c = c;
    return make_potential(s).drift(1.0, 1.0, H);
}

}  // namespace

TEST(Picard, NoInteractionConvergesImmediately) {
    SimConfig c;
    c.dt = 0.01;
    c.t_final = 1.0;
    c.n = 50;
    const PicardTrace p = picard_converge(c, quadratic_model(0.0, 1.0), gaussian_sampler(1, 0, 1.0, 1.0), 5, 0.0);
    // the second iterate repeats the first exactly
    ASSERT_GE(p.distances.size(), 2u);
    EXPECT_EQ(p.distances[1], 0.0);
    EXPECT_TRUE(p.converged);
    EXPECT_EQ(p.iterations, 2u);
}

TEST(Picard, DistancesContract) {
    SimConfig c;
    c.dt = 0.01;
    c.t_final = 1.0;
    c.n = 100;
    c.stride = 2;
    const PicardTrace p = picard_converge(c, quadratic_model(0.5, infinity), gaussian_sampler(2, 0, 1.0, 1.0, 1.0), 6, 0.0);
    ASSERT_EQ(p.distances.size(), 6u);
    for (std::size_t k = 1; k < p.distances.size(); ++k) EXPECT_LT(p.distances[k], p.distances[k - 1]);
    // factorial decay: the ratio keeps shrinking
    EXPECT_LT(p.distances[5] / p.distances[4], p.distances[2] / p.distances[1]);
    EXPECT_EQ(p.final_iterate.size(), 51u);
}

TEST(Picard, FixedPointIsTheParticleSystem) {
    // With the particle system's own trajectory frozen, one Picard step
    // reproduces it (same noise, same sources).
    SimConfig c;
    c.dt = 0.01;
    c.t_final = 1.0;
    c.n = 20;
    const DriftModel m = quadratic_model(0.5, 0.3);
    const auto init = gaussian_sampler(4, 0, 1.0, 1.0);
    const RunResult r = run(c, m, init);
    const auto it = picard_iterate(c, m, r.snapshots, init);
    EXPECT_LE(coupled_sup_distance2(it, r.snapshots, c.n), 1e-20);
}

TEST(Picard, FrozenHistoryErrors) {
    const DriftModel m = quadratic_model(0.5, 1.0);
    EXPECT_THROW(frozen_history(m, {}, 0.1), InvalidInput);
    std::vector<Snapshot> bad = {{0.0, {1.0}, {0.0}}, {0.3, {1.0}, {0.0}}};
    EXPECT_THROW(frozen_history(m, bad, 0.1), InvalidInput);
    SimConfig c;
    c.dt = 0.1;
    c.t_final = 1.0;
    c.n = 1;
    std::vector<Snapshot> short_frozen = {{0.0, {1.0}, {0.0}}, {0.1, {1.0}, {0.0}}};
    EXPECT_THROW(picard_iterate(c, m, short_frozen, fixed_sampler({1.0}, {0.0})), InvalidInput);
}
