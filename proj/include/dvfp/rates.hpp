#ifndef DVFP_RATES_HPP
#define DVFP_RATES_HPP

// Closed-form decay rates.
//
// For the comparison inequality y' <= -a y + b sup_{[t-H,t]} y with a > b >= 0
// the decay rate is the unique zero of f(l) = -a + l + b exp(l H),
// l = a - W(b H e^{aH}) / H. The contraction estimate for the delay kinetic
// system has a = lambda1, b = lambda2 given in closed form by (gamma, eta).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dvfp/error.hpp"

namespace dvfp {

namespace detail {

/// W0 from log(z) for arguments too large to exponentiate: solves w + log w = L.
inline double lambert_w0_of_log(double log_z) {
    double w = log_z - std::log(log_z);
    for (int it = 0; it < 50; ++it) {
        const double f = w + std::log(w) - log_z;
        const double step = f / (1.0 + 1.0 / w);
        w -= step;
        if (std::abs(step) <= 1e-16 * w) break;
    }
    return w;
}

}  // namespace detail

/// Principal branch of the Lambert W function on [0, inf): w e^w = z.
/// Halley iteration from log(1+z), bisection on [0, log(1+z)] as fallback.
inline double lambert_w0(double z) {
    if (std::isnan(z) || z < 0.0) throw OutOfDomain("lambert_w0: argument must be >= 0 (negative branch unsupported)");
    if (z == 0.0) return 0.0;
    if (std::isinf(z)) return z;
    double w = std::log1p(z);
    for (int it = 0; it < 100; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - z;
        const double wp1 = w + 1.0;
        const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        const double step = f / denom;
        w -= step;
        if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(w))) {
            if (w >= 0.0) return w;
            break;
        }
    }
    // Bisection on the increasing map w -> w e^w; W(z) <= log(1+z) for z >= 0.
    double lo = 0.0, hi = std::log1p(z);
    for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mid * std::exp(mid) < z ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Decay rate of the Halanay comparison equation, a - W(b H e^{aH}) / H.
/// Limits: H = 0 gives a - b; H = inf gives 0 (a when b = 0).
inline double halanay_rate(double a, double b, double H) {
    if (!(b >= 0.0) || !(a > b)) {
        throw NoPositiveRate("halanay_rate: requires a > b >= 0 (a=" + std::to_string(a) + ", b=" + std::to_string(b) +
                             ")");
    }
    if (!(H >= 0.0)) throw InvalidInput("halanay_rate: H must be in [0, inf]");
    if (b == 0.0) return a;
    if (H == 0.0) return a - b;
    if (std::isinf(H)) return 0.0;

    const double log_z = std::log(b * H) + a * H;
    const double w = log_z < 700.0 ? lambert_w0(std::exp(log_z)) : detail::lambert_w0_of_log(log_z);
    double lambda = a - w / H;
    // Polish on the characteristic equation; f is increasing and convex.
    auto f = [&](double l) { return -a + l + b * std::exp(l * H); };
    double fl = f(lambda);
    for (int it = 0; it < 3; ++it) {
        const double next = lambda - fl / (1.0 + b * H * std::exp(lambda * H));
        const double fn = f(next);
        if (!(std::abs(fn) < std::abs(fl))) break;
        lambda = next;
        fl = fn;
    }
    return std::clamp(lambda, std::numeric_limits<double>::min(), a);
}

/// Upper end of the plotted validity region, 2 gamma / (3 (1 + gamma)).
inline double eta_bar(double gamma) {
    if (!(gamma > 0.0)) throw InvalidInput("eta_bar: gamma must be positive");
    return 2.0 * gamma / (3.0 * (1.0 + gamma));
}

/// Rate without interaction: gamma (1 - sqrt(gamma^2 / (4 + gamma^2))).
inline double hypocoercive_rate(double gamma) {
    if (!(gamma > 0.0)) throw InvalidInput("hypocoercive_rate: gamma must be positive");
    const double r = std::sqrt(4.0 + gamma * gamma);
    // 1 - gamma/r written without cancellation
    return gamma * 4.0 / (r * (r + gamma));
}

/// Maximizer of hypocoercive_rate over gamma > 0 by golden-section search.
inline double argmax_hypocoercive_rate(double lo = 0.1, double hi = 10.0, double tol = 1e-10) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = hypocoercive_rate(c), fd = hypocoercive_rate(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = hypocoercive_rate(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = hypocoercive_rate(d);
        }
    }
    return 0.5 * (a + b);
}

struct Lambdas {
    double lambda1;
    double lambda2;
};

/// lambda1, lambda2 of the contraction estimate for b = 2/gamma.
/// Requires 0 <= eta < gamma / (1 + gamma).
inline Lambdas lambdas(double gamma, double eta) {
    if (!(gamma > 0.0)) throw InvalidInput("lambdas: gamma must be positive");
    if (!(eta >= 0.0)) throw InvalidInput("lambdas: eta must be nonnegative");
    if (!(eta < gamma / (1.0 + gamma))) {
        throw OutOfValidity("lambdas: eta must satisfy eta < gamma/(1+gamma) (eta=" + std::to_string(eta) +
                            ", gamma=" + std::to_string(gamma) + ")");
    }
    const double g2 = 4.0 + gamma * gamma;
    const double root = std::sqrt(4.0 * eta * eta + g2 * (gamma - eta) * (gamma - eta));
    const double l1 = gamma - (1.0 + 2.0 * gamma / g2) * eta - gamma / g2 * root;
    const double l2 = (2.0 + gamma) * (2.0 + gamma) / ((1.0 + gamma) * g2) * eta / 2.0;
    return {l1, l2};
}

/// Combined rate lambda1 - W(lambda2 H e^{lambda1 H}) / H.
inline double overall_rate(double gamma, double eta, double H) {
    const Lambdas l = lambdas(gamma, eta);
    if (!(l.lambda1 > l.lambda2)) {
        throw NoPositiveRate("overall_rate: lambda1 <= lambda2 (gamma=" + std::to_string(gamma) +
                             ", eta=" + std::to_string(eta) + ")");
    }
    return halanay_rate(l.lambda1, l.lambda2, H);
}

/// b maximizing lambda1 at eta = 0.
inline double optimal_b(double gamma) {
    if (!(gamma > 0.0)) throw InvalidInput("optimal_b: gamma must be positive");
    return 2.0 / gamma;
}

/// Parameter set of the contraction estimate and its validity flags.
struct RateParameters {
    double gamma = 1.0;
    double eta = 0.0;
    double H = 0.0;
    double b = 2.0;

    static RateParameters with_optimal_b(double gamma, double eta, double H) {
        return {gamma, eta, H, optimal_b(gamma)};
    }

    struct Flags {
        bool eta_admits_b = false;    ///< eta < 1 + gamma - sqrt(1 + gamma^2)
        bool b_above_lower = false;   ///< 2 / (2 gamma - eta) < b
        bool b_below_upper = false;   ///< b < 2 (1 - eta) / eta, vacuous at eta = 0
        bool eta_below_ratio = false; ///< eta < gamma / (1 + gamma)
        bool eta_below_bar = false;   ///< eta <= 2 gamma / (3 (1 + gamma))
        bool all() const { return eta_admits_b && b_above_lower && b_below_upper && eta_below_ratio && eta_below_bar; }
    };

    Flags validity() const {
        Flags f;
        f.eta_admits_b = eta < 1.0 + gamma - std::sqrt(1.0 + gamma * gamma);
        f.b_above_lower = 2.0 * gamma - eta > 0.0 && 2.0 / (2.0 * gamma - eta) < b;
        f.b_below_upper = eta == 0.0 || b < 2.0 * (1.0 - eta) / eta;
        f.eta_below_ratio = eta < gamma / (1.0 + gamma);
        f.eta_below_bar = eta <= eta_bar(gamma);
        return f;
    }
};

/// Intermediate constants of the contraction estimate for a general b,
/// with a = b + gamma, delta1 = delta3 = delta4 = 1, delta2 = 2 + b.
struct RateDerivation {
    double b = 0, gamma = 0, eta = 0;
    double a = 0;
    double delta1 = 1, delta2 = 0, delta3 = 1, delta4 = 1;
    double d1 = 0, d2 = 0, d3 = 0, d4 = 0;
    double epsilon = 0;
    double lambda1_general = 0;
    double lambda2_general = 0;
    /// Residual of epsilon in (1 - eps) = (1 + d3 - 1/eps) d2^2, the balance
    /// that the closed form for epsilon solves.
    double epsilon_residual = 0;
    /// Residual of epsilon in the variant (1 - eps) = (1 - d3 - 1/eps) d2^2.
    double epsilon_residual_variant = 0;
    /// lambda1_general - lambdas(gamma, eta).lambda1 when b = 2/gamma, else NaN.
    double lambda1_discrepancy = std::numeric_limits<double>::quiet_NaN();
    double lambda2_discrepancy = std::numeric_limits<double>::quiet_NaN();
};

/// The three positivity conditions behind d_i > 0; throws naming the first failure.
inline RateDerivation derivation_constants(double b, double gamma, double eta) {
    if (!(gamma > 0.0) || !(b > 0.0) || !(eta >= 0.0)) {
        throw InvalidInput("derivation_constants: need b > 0, gamma > 0, eta >= 0");
    }
    if (!(b * (b + gamma) > 1.0)) throw OutOfValidity("derivation_constants: violated b (b + gamma) > 1");
    if (!(2.0 > (2.0 + b) * eta)) throw OutOfValidity("derivation_constants: violated 2 > (2 + b) eta");
    if (!(2.0 * b * gamma > 2.0 + b * eta)) throw OutOfValidity("derivation_constants: violated 2 b gamma > 2 + b eta");

    RateDerivation r;
    r.b = b;
    r.gamma = gamma;
    r.eta = eta;
    r.a = b + gamma;
    r.delta2 = 2.0 + b;
    r.d1 = (2.0 - (2.0 + b) * eta) / (b + gamma);
    r.d2 = 1.0 / std::sqrt(b * (b + gamma) - 1.0);
    r.d3 = (b + gamma) * (2.0 * b * gamma - 2.0 - b * eta) / r.d1;
    r.d4 = (1.0 + b) * (1.0 + b) * eta / (2.0 * (2.0 + b) * (b + gamma));

    const double d22 = r.d2 * r.d2;
    const double m = 1.0 - (1.0 + r.d3) * d22;
    const double root = std::sqrt(4.0 * d22 + m * m);
    r.epsilon = 0.5 * (m + root);
    r.lambda1_general = 0.5 * r.d1 * (1.0 + (1.0 + r.d3) * d22 - root);
    r.lambda2_general = r.d4 * (1.0 + d22);
    r.epsilon_residual = (1.0 - r.epsilon) - (1.0 + r.d3 - 1.0 / r.epsilon) * d22;
    r.epsilon_residual_variant = (1.0 - r.epsilon) - (1.0 - r.d3 - 1.0 / r.epsilon) * d22;

    if (std::abs(b - 2.0 / gamma) <= 1e-12 * b && eta < gamma / (1.0 + gamma)) {
        const Lambdas l = lambdas(gamma, eta);
        r.lambda1_discrepancy = r.lambda1_general - l.lambda1;
        r.lambda2_discrepancy = r.lambda2_general - l.lambda2;
    }
    return r;
}

}  // namespace dvfp

#endif
