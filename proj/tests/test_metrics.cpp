#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dvfp/metrics.hpp"
#include "support.hpp"

using namespace dvfp;

namespace {

PointCloud random_cloud(support::Gen& g, std::size_t n, std::size_t dim, double shift = 0.0) {
    PointCloud c(n, dim);
    for (double& x : c.data) x = g.normal() + shift;
    return c;
}

// Minimum mean cost over all permutations.
template <class Cost>
double brute_force(const PointCloud& A, const PointCloud& B, Cost cost) {
    std::vector<std::size_t> perm(A.n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = infinity;
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < A.n; ++i) total += cost(A.row(i), B.row(perm[i]));
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(A.n);
}

double sq(std::span<const double> x, std::span<const double> y) { return detail::squared_distance(x, y); }

}  // namespace

TEST(QuadraticForm, Examples) {
    const QuadraticForm f(2.0, 2.0);
    const std::vector<double> zero = {0.0, 0.0}, a = {1.0, 1.0}, b = {1.0, -1.0};
    EXPECT_EQ(f(zero), 0.0);
    EXPECT_EQ(f(a), 6.0);
    EXPECT_EQ(f(b), 2.0);
    EXPECT_NEAR(f.p(), 1.0, 1e-15);
    EXPECT_NEAR(f.q(), 3.0, 1e-15);
    EXPECT_GE(f(b), f.p() * 2.0 - 1e-15);
    EXPECT_LE(f(a), f.q() * 2.0 + 1e-15);
}

TEST(QuadraticForm, EqualCoefficients) {
    for (double a : {1.5, 2.0, 7.0}) {
        const auto pq = equivalence_constants(a, a);
        EXPECT_NEAR(pq.p, a - 1.0, 1e-14);
        EXPECT_NEAR(pq.q, a + 1.0, 1e-14);
    }
}

TEST(QuadraticForm, ContractionForm) {
    const QuadraticForm f = QuadraticForm::contraction(1.0);
    EXPECT_EQ(f.b(), 2.0);
    EXPECT_EQ(f.a(), 3.0);
    EXPECT_GT(f.p(), 0.0);
    EXPECT_NEAR(f.p() * f.q(), f.a() * f.b() - 1.0, 1e-14);
}

TEST(QuadraticForm, Invalid) {
    EXPECT_THROW(QuadraticForm(1.0, 1.0), InvalidForm);
    EXPECT_THROW(QuadraticForm(-1.0, 3.0), InvalidForm);
    EXPECT_THROW(QuadraticForm(0.5, 0.5), InvalidInput);
}

TEST(QuadraticForm, EquivalenceBoundsOnSamples) {
    support::Gen g(1);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = g.uniform(0.2, 6.0);
        const double b = (1.0 + g.uniform(0.01, 3.0)) / a;
        const QuadraticForm f(a, b);
        for (int i = 0; i < 500; ++i) {
            const auto z = g.normals(6);
            double n2 = 0.0;
            for (double x : z) n2 += x * x;
            const double q = f(z);
            EXPECT_GE(q, f.p() * n2 * (1.0 - 1e-12));
            EXPECT_LE(q, f.q() * n2 * (1.0 + 1e-12));
        }
    }
}

TEST(QuadraticForm, FactorizationResidual) {
    support::Gen g(2);
    for (double a : {1.1, 3.0, 10.0}) {
        const QuadraticForm f(a, 2.0 / a + 0.5);
        for (std::size_t d : {1u, 2u, 3u}) {
            const FormFactorization fac = f.factorization(d);
            EXPECT_LE(fac.residual(), 1e-12);
            for (int i = 0; i < 100; ++i) {
                const auto z = g.normals(2 * d);
                const auto xi = fac.apply_S(z);
                double xi2 = 0.0, zMz = 0.0;
                for (double x : xi) xi2 += x * x;
                for (std::size_t r = 0; r < 2 * d; ++r)
                    for (std::size_t c = 0; c < 2 * d; ++c) zMz += z[r] * fac.m(r, c) * z[c];
                EXPECT_NEAR(xi2, f(z), 1e-12 * (1.0 + f(z)));
                EXPECT_NEAR(zMz, f(z), 1e-12 * (1.0 + f(z)));
            }
        }
    }
}

TEST(Dist2, Examples) {
    support::Gen g(3);
    const PointCloud A = random_cloud(g, 5, 4);
    EXPECT_EQ(dist2_exact(A, A), 0.0);
    PointCloud one(1, 2), two(1, 2);
    one.data = {0.0, 0.0};
    two.data = {3.0, 4.0};
    EXPECT_EQ(dist2_exact(one, two), 5.0);
}

TEST(Dist2, MatchesBruteForce) {
    support::Gen g(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + g.index(6);
        const PointCloud A = random_cloud(g, n, 2);
        const PointCloud B = random_cloud(g, n, 2, 0.5);
        EXPECT_EQ(dist2_exact(A, B), std::sqrt(brute_force(A, B, sq)));
    }
}

TEST(Dist2, Errors) {
    PointCloud a(3, 2), b(4, 2), c(3, 4);
    EXPECT_THROW(dist2_exact(a, b), InvalidInput);
    EXPECT_THROW(dist2_exact(a, c), InvalidInput);
    PointCloud big(max_exact_points + 1, 2);
    EXPECT_THROW(dist2_exact(big, big), InvalidInput);
}

TEST(DistQ, Examples) {
    const QuadraticForm f(2.0, 2.0);
    support::Gen g(5);
    const PointCloud A = random_cloud(g, 6, 2);
    EXPECT_EQ(distQ_exact(A, A, f).squared, 0.0);
    PointCloud one(1, 2), two(1, 2);
    one.data = {1.0, 2.0};
    two.data = {0.5, -1.0};
    const std::vector<double> diff = {0.5, 3.0};
    EXPECT_EQ(distQ_exact(one, two, f).squared, f(diff));
    EXPECT_NEAR(distQ_exact(one, two, f).value(), std::sqrt(f(diff)), 1e-15);
}

TEST(DistQ, EqualsEuclideanOnTransformedPoints) {
    support::Gen g(6);
    const QuadraticForm f = QuadraticForm::contraction(1.3);
    const std::size_t d = 2;
    const FormFactorization fac = f.factorization(d);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + g.index(20);
        const PointCloud A = random_cloud(g, n, 2 * d);
        const PointCloud B = random_cloud(g, n, 2 * d, 0.3);
        PointCloud SA(n, 2 * d), SB(n, 2 * d);
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = fac.apply_S(A.row(i));
            const auto b = fac.apply_S(B.row(i));
            std::copy(a.begin(), a.end(), SA.row(i).begin());
            std::copy(b.begin(), b.end(), SB.row(i).begin());
        }
        const double dq = distQ_exact(A, B, f).squared;
        const double d2 = dist2_exact(SA, SB);
        EXPECT_NEAR(dq, d2 * d2, 1e-12 * (1.0 + dq));
    }
}

TEST(DistQ, CoupledUpperBoundAndEquivalence) {
    support::Gen g(7);
    const QuadraticForm f = QuadraticForm::contraction(1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + g.index(30);
        const PointCloud A = random_cloud(g, n, 2);
        const PointCloud B = random_cloud(g, n, 2, 1.0);
        const double exact = distQ_exact(A, B, f).squared;
        EXPECT_GE(distQ_coupled_upper(A, B, f).squared, exact - 1e-12);
        const double w2 = dist2_exact(A, B);
        EXPECT_GE(exact, f.p() * w2 * w2 * (1.0 - 1e-12));
        EXPECT_LE(exact, f.q() * w2 * w2 * (1.0 + 1e-12));
    }
}

TEST(DistQ, PermutationInvariance) {
    support::Gen g(8);
    const QuadraticForm f(3.0, 1.0);
    const PointCloud A = random_cloud(g, 12, 2);
    const PointCloud B = random_cloud(g, 12, 2, 0.5);
    PointCloud Bp(12, 2);
    for (std::size_t i = 0; i < 12; ++i) {
        const auto src = B.row((i * 5 + 3) % 12);
        std::copy(src.begin(), src.end(), Bp.row(i).begin());
    }
    EXPECT_NEAR(distQ_exact(A, B, f).squared, distQ_exact(A, Bp, f).squared, 1e-12);
    EXPECT_NE(distQ_coupled_upper(A, B, f).squared, distQ_coupled_upper(A, Bp, f).squared);
}

TEST(Assignment, IdentityOnDiagonalCost) {
    const std::size_t n = 5;
    std::vector<double> cost(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i) cost[i * n + (n - 1 - i)] = 0.0;
    const auto perm = solve_assignment(cost, n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(perm[i], n - 1 - i);
}

TEST(PhaseCloud, Layout) {
    const std::vector<double> X = {1, 2, 3, 4}, V = {5, 6, 7, 8};
    const PointCloud c = phase_cloud(X, V, 2);
    EXPECT_EQ(c.n, 2u);
    EXPECT_EQ(c.dim, 4u);
    EXPECT_EQ(c.data, (std::vector<double>{1, 2, 5, 6, 3, 4, 7, 8}));
}
