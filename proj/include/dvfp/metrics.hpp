#ifndef DVFP_METRICS_HPP
#define DVFP_METRICS_HPP

// Wasserstein-type distances between equally weighted point clouds in phase
// space R^{2d}, and the perturbed quadratic form
//
//   Q(z) = a |z1|^2 + 2 <z1, z2> + b |z2|^2,   a, b > 0, ab > 1,
//
// together with its equivalence constants p |z|^2 <= Q(z) <= q |z|^2 and the
// factorization Q(z) = <z, M_Q z> = |S z|^2.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dvfp/error.hpp"

namespace dvfp {

class InvalidForm : public InvalidInput {
  public:
    using InvalidInput::InvalidInput;
};

struct EquivalenceConstants {
    double p;
    double q;
};

/// p, q with p |z|^2 <= Q(z) <= q |z|^2. Requires ab > 1.
inline EquivalenceConstants equivalence_constants(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !(a * b > 1.0)) {
        throw InvalidForm("quadratic form needs a > 0, b > 0 and ab > 1 (a=" + std::to_string(a) +
                          ", b=" + std::to_string(b) + ")");
    }
    const double r = std::sqrt(4.0 + (b - a) * (b - a));
    // p = ((a+b) - r)/2 loses digits when ab is close to 1; p q = ab - 1.
    const double q = 0.5 * ((a + b) + r);
    const double p = (a * b - 1.0) / q;
    return {p, q};
}

/// Dense 2d x 2d matrices of the factorization Q(z) = <z, M_Q z> = <Sz, Sz>.
struct FormFactorization {
    std::size_t dim = 0;  ///< 2d
    std::vector<double> M;  ///< row-major
    std::vector<double> S;  ///< row-major, upper block triangular

    double m(std::size_t r, std::size_t c) const { return M[r * dim + c]; }
    double s(std::size_t r, std::size_t c) const { return S[r * dim + c]; }

    /// xi = S z
    std::vector<double> apply_S(std::span<const double> z) const {
        std::vector<double> out(dim, 0.0);
        for (std::size_t r = 0; r < dim; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < dim; ++c) acc += S[r * dim + c] * z[c];
            out[r] = acc;
        }
        return out;
    }

    /// max |(S^T S - M_Q)_{rc}|
    double residual() const {
        double worst = 0.0;
        for (std::size_t r = 0; r < dim; ++r) {
            for (std::size_t c = 0; c < dim; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < dim; ++k) acc += S[k * dim + r] * S[k * dim + c];
                worst = std::max(worst, std::abs(acc - M[r * dim + c]));
            }
        }
        return worst;
    }
};

class QuadraticForm {
  public:
    QuadraticForm(double a, double b) : a_(a), b_(b), pq_(equivalence_constants(a, b)) {}

    /// The form used by the contraction estimate: b = 2/gamma (unless given), a = b + gamma.
    static QuadraticForm contraction(double gamma, double b) { return QuadraticForm(b + gamma, b); }
    static QuadraticForm contraction(double gamma) { return contraction(gamma, 2.0 / gamma); }

    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    double p() const noexcept { return pq_.p; }
    double q() const noexcept { return pq_.q; }
    EquivalenceConstants equivalence() const noexcept { return pq_; }

    /// Q(z) for z = (z1, z2), each half of length d.
    double operator()(std::span<const double> z) const {
        if (z.size() % 2 != 0) throw InvalidInput("Q: phase-space point must have even length");
        const std::size_t d = z.size() / 2;
        return eval(z.first(d), z.last(d));
    }

    double eval(std::span<const double> z1, std::span<const double> z2) const noexcept {
        double xx = 0.0, xv = 0.0, vv = 0.0;
        for (std::size_t k = 0; k < z1.size(); ++k) {
            xx += z1[k] * z1[k];
            xv += z1[k] * z2[k];
            vv += z2[k] * z2[k];
        }
        return a_ * xx + 2.0 * xv + b_ * vv;
    }

    /// Q(z - zhat) without forming the difference.
    double eval_difference(std::span<const double> z, std::span<const double> zh) const noexcept {
        const std::size_t d = z.size() / 2;
        double xx = 0.0, xv = 0.0, vv = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double x = z[k] - zh[k];
            const double v = z[d + k] - zh[d + k];
            xx += x * x;
            xv += x * v;
            vv += v * v;
        }
        return a_ * xx + 2.0 * xv + b_ * vv;
    }

    FormFactorization factorization(std::size_t d) const {
        FormFactorization f;
        f.dim = 2 * d;
        f.M.assign(f.dim * f.dim, 0.0);
        f.S.assign(f.dim * f.dim, 0.0);
        const double ra = std::sqrt(a_);
        const double lower = std::sqrt(a_ * b_ - 1.0) / ra;
        for (std::size_t k = 0; k < d; ++k) {
            f.M[k * f.dim + k] = a_;
            f.M[k * f.dim + d + k] = 1.0;
            f.M[(d + k) * f.dim + k] = 1.0;
            f.M[(d + k) * f.dim + d + k] = b_;
            f.S[k * f.dim + k] = ra;
            f.S[k * f.dim + d + k] = 1.0 / ra;
            f.S[(d + k) * f.dim + d + k] = lower;
        }
        return f;
    }

  private:
    double a_;
    double b_;
    EquivalenceConstants pq_;
};

/// Equally weighted cloud of n points in R^dim, row-major.
struct PointCloud {
    std::size_t n = 0;
    std::size_t dim = 0;
    std::vector<double> data;

    PointCloud() = default;
    PointCloud(std::size_t n_, std::size_t dim_) : n(n_), dim(dim_), data(n_ * dim_, 0.0) {}

    std::span<const double> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * dim, dim}; }
};

/// Phase-space cloud from separate N x d position and velocity arrays.
inline PointCloud phase_cloud(std::span<const double> X, std::span<const double> V, std::size_t d) {
    if (X.size() != V.size() || d == 0 || X.size() % d != 0) throw InvalidInput("phase_cloud: shape mismatch");
    const std::size_t n = X.size() / d;
    PointCloud c(n, 2 * d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
            c.data[i * 2 * d + k] = X[i * d + k];
            c.data[i * 2 * d + d + k] = V[i * d + k];
        }
    }
    return c;
}

inline constexpr std::size_t max_exact_points = 512;

/// Minimum-cost perfect matching on a dense n x n cost matrix (row-major).
/// Returns assignment[row] = column. Shortest augmenting paths with dual
/// potentials, O(n^3).
inline std::vector<std::size_t> solve_assignment(std::span<const double> cost, std::size_t n) {
    if (cost.size() != n * n) throw InvalidInput("solve_assignment: cost matrix must be n x n");
    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is the virtual root.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
    return assignment;
}

namespace detail {

inline void check_clouds(const PointCloud& A, const PointCloud& B, bool exact) {
    if (A.n != B.n || A.dim != B.dim) throw InvalidInput("point clouds differ in size or dimension");
    if (A.n == 0) throw InvalidInput("point clouds are empty");
    if (exact && A.n > max_exact_points) {
        throw InvalidInput("exact assignment limited to " + std::to_string(max_exact_points) + " points");
    }
}

template <class Cost>
double exact_mean_cost(const PointCloud& A, const PointCloud& B, Cost&& c) {
    check_clouds(A, B, true);
    const std::size_t n = A.n;
    std::vector<double> cost(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = c(A.row(i), B.row(j));
    }
    const auto perm = solve_assignment(cost, n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i * n + perm[i]];
    return total / static_cast<double>(n);
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    return s;
}

}  // namespace detail

/// Result of a dist_Q computation. `squared` is the infimum of the mean Q
/// cost (the quantity that decays in the contraction estimate); `value()` is
/// its square root.
struct DistQ {
    double squared = 0.0;
    double value() const { return std::sqrt(squared); }
};

/// Wasserstein-2 distance between two equally weighted clouds of equal size.
inline double dist2_exact(const PointCloud& A, const PointCloud& B) {
    return std::sqrt(detail::exact_mean_cost(A, B, detail::squared_distance));
}

/// dist_Q between two equally weighted clouds of phase-space points.
inline DistQ distQ_exact(const PointCloud& A, const PointCloud& B, const QuadraticForm& form) {
    if (A.dim % 2 != 0) throw InvalidInput("distQ_exact: points must live in R^{2d}");
    return {detail::exact_mean_cost(
        A, B, [&form](std::span<const double> z, std::span<const double> zh) { return form.eval_difference(z, zh); })};
}

/// Mean Q cost of the index coupling i <-> i; an upper bound for dist_Q^2.
inline DistQ distQ_coupled_upper(const PointCloud& A, const PointCloud& B, const QuadraticForm& form) {
    detail::check_clouds(A, B, false);
    if (A.dim % 2 != 0) throw InvalidInput("distQ_coupled_upper: points must live in R^{2d}");
    double total = 0.0;
    for (std::size_t i = 0; i < A.n; ++i) total += form.eval_difference(A.row(i), B.row(i));
    return {total / static_cast<double>(A.n)};
}

}  // namespace dvfp

#endif
