#ifndef DVFP_KUMMER_HPP
#define DVFP_KUMMER_HPP

// Infinite-delay comparison equation
//
//   phi'(t) = -lambda1 phi(t) + lambda2 (1/t) int_0^t phi(s) ds,
//
// whose regular solution is phi(t) = c e^{-lambda1 t} M(Lambda, 1, lambda1 t)
// with Lambda = lambda2 / lambda1 and Kummer's function
// M(Lambda, 1, tau) = sum_n (Lambda)_n tau^n / (n!)^2. For large t,
// phi ~ t^{-(1 - Lambda)}.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "dvfp/error.hpp"
#include "dvfp/trace.hpp"

namespace dvfp {

namespace detail {

inline void check_kummer_args(double Lambda, double tau) {
    if (!(Lambda >= 0.0 && Lambda <= 1.0)) throw OutOfDomain("kummer: Lambda must lie in [0, 1]");
    if (!(tau >= 0.0) || std::isinf(tau)) throw OutOfDomain("kummer: tau must be finite and >= 0");
}

/// e^{-tau} M(Lambda, 1, tau) from the power series.
inline double kummer_scaled_series(double Lambda, double tau) {
    // The terms grow until n ~ tau, so sum in scaled form to avoid overflow:
    // term_n carries the factor e^{-tau} from the start.
    double term = std::exp(-tau);
    double sum = term;
    for (std::size_t n = 0; n < 100000; ++n) {
        const double nd = static_cast<double>(n);
        term *= (Lambda + nd) * tau / ((nd + 1.0) * (nd + 1.0));
        sum += term;
        if (nd > tau && term <= 1e-17 * sum) break;
        if (term == 0.0) break;
    }
    return sum;
}

/// e^{-tau} M(Lambda, 1, tau) from the large-tau expansion
/// tau^{Lambda-1} / Gamma(Lambda) sum_n ((1-Lambda)_n)^2 / (n! tau^n).
/// The exponentially small companion term is dropped.
inline double kummer_scaled_asymptotic(double Lambda, double tau) {
    double term = 1.0;
    double sum = 1.0;
    for (std::size_t n = 0; n < 200; ++n) {
        const double nd = static_cast<double>(n);
        const double next = term * (1.0 - Lambda + nd) * (1.0 - Lambda + nd) / ((nd + 1.0) * tau);
        if (std::abs(next) >= std::abs(term)) break;  // smallest term reached
        term = next;
        sum += term;
        if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
    }
    return std::pow(tau, Lambda - 1.0) / std::tgamma(Lambda) * sum;
}

inline constexpr double kummer_switch_tau = 50.0;

}  // namespace detail

/// e^{-tau} M(Lambda, 1, tau), finite for all tau >= 0.
inline double kummer_m_scaled(double Lambda, double tau) {
    detail::check_kummer_args(Lambda, tau);
    if (Lambda == 0.0) return std::exp(-tau);
    if (tau > detail::kummer_switch_tau) {
        // For tiny Lambda the companion term e^{-tau} is no longer negligible.
        const double companion = Lambda < 1e-8 ? std::exp(-tau) : 0.0;
        return detail::kummer_scaled_asymptotic(Lambda, tau) + companion;
    }
    return detail::kummer_scaled_series(Lambda, tau);
}

/// Kummer's function M(Lambda, 1, tau) for Lambda in [0, 1]. Overflows to inf
/// for tau beyond ~700; use kummer_m_scaled there.
inline double kummer_m(double Lambda, double tau) {
    detail::check_kummer_args(Lambda, tau);
    if (Lambda == 0.0) return 1.0;
    return std::exp(tau) * kummer_m_scaled(Lambda, tau);
}

struct KummerParams {
    double lambda1 = 1.0;
    double lambda2 = 0.0;
    double y0 = 1.0;
    double t0 = 0.0;

    double Lambda() const { return lambda2 / lambda1; }

    void validate() const {
        if (!(lambda1 > 0.0)) throw InvalidInput("KummerParams: lambda1 must be positive");
        if (!(lambda2 >= 0.0)) throw InvalidInput("KummerParams: lambda2 must be nonnegative");
        if (!(Lambda() < 1.0)) throw OutOfDomain("KummerParams: need lambda2 < lambda1");
        if (!(y0 > 0.0) || !std::isfinite(y0)) throw InvalidInput("KummerParams: y0 must be positive");
        if (!(t0 >= 0.0)) throw InvalidInput("KummerParams: t0 must be >= 0");
    }
};

/// Regular solution of the infinite-delay equation through (t0, y0):
/// y0 e^{-lambda1 t} M(Lambda, 1, lambda1 t) / (e^{-lambda1 t0} M(Lambda, 1, lambda1 t0)).
inline double phi_infinite_delay(const KummerParams& p, double t) {
    p.validate();
    if (!(t >= p.t0)) throw InvalidInput("phi_infinite_delay: t must be >= t0");
    const double L = p.Lambda();
    return p.y0 * kummer_m_scaled(L, p.lambda1 * t) / kummer_m_scaled(L, p.lambda1 * p.t0);
}

/// RK4 integration of phi' = -lambda1 phi + lambda2 I / t with I' = phi on
/// [t0, t_final]. The past (0, t0] is taken constant, I(t0) = y0 t0; at
/// t = 0 the average I/t is replaced by its limit phi(0). Records every
/// `record_every`-th step.
inline DecayTrace integro_ode_solve(double lambda1, double lambda2, double y0, double t0, double t_final, double dt,
                                    std::size_t record_every = 1) {
    if (!(lambda1 > 0.0) || !(lambda2 >= 0.0)) throw InvalidInput("integro_ode_solve: need lambda1 > 0, lambda2 >= 0");
    if (!(t0 >= 0.0) || !(t_final >= t0)) throw InvalidInput("integro_ode_solve: need 0 <= t0 <= t_final");
    if (!(dt > 0.0)) throw InvalidInput("integro_ode_solve: dt must be positive");
    if (record_every < 1) throw InvalidInput("integro_ode_solve: record_every must be >= 1");

    auto rhs = [&](double t, double phi, double I) {
        const double avg = t > 0.0 ? I / t : phi;
        return -lambda1 * phi + lambda2 * avg;
    };
    DecayTrace out("phi");
    double phi = y0;
    double I = y0 * t0;
    out.push(t0, phi);
    const auto steps = static_cast<std::size_t>(std::llround((t_final - t0) / dt));
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = t0 + static_cast<double>(k) * dt;
        const double k1 = rhs(t, phi, I), l1 = phi;
        const double p2 = phi + 0.5 * dt * k1, i2 = I + 0.5 * dt * l1;
        const double k2 = rhs(t + 0.5 * dt, p2, i2), l2 = p2;
        const double p3 = phi + 0.5 * dt * k2, i3 = I + 0.5 * dt * l2;
        const double k3 = rhs(t + 0.5 * dt, p3, i3), l3 = p3;
        const double p4 = phi + dt * k3, i4 = I + dt * l3;
        const double k4 = rhs(t + dt, p4, i4), l4 = p4;
        phi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        I += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        if (!std::isfinite(phi)) throw Divergence("integro_ode_solve: non-finite solution", k + 1);
        if ((k + 1) % record_every == 0 || k + 1 == steps) out.push(t0 + static_cast<double>(k + 1) * dt, phi);
    }
    return out;
}

/// Slope of log phi against log t on [t_lo, t_hi]; about -(1 - Lambda) for
/// the infinite-delay solution once lambda1 t is large.
inline LineFit decay_exponent_fit(const DecayTrace& trace, double t_lo, double t_hi) {
    if (!(t_lo > 0.0) || !(t_hi > t_lo)) throw InvalidInput("decay_exponent_fit: need 0 < t_lo < t_hi");
    return fit_power_law(trace, t_lo, t_hi);
}

/// Residual t phi'' + (1 + lambda1 t) phi' + (lambda1 - lambda2) phi of the
/// second-order form, by central differences with step `h` (relative to phi).
inline double kummer_ode_residual(const KummerParams& p, double t, double h) {
    if (!(t - h >= p.t0)) throw InvalidInput("kummer_ode_residual: stencil leaves the domain");
    const double fm = phi_infinite_delay(p, t - h);
    const double f0 = phi_infinite_delay(p, t);
    const double fp = phi_infinite_delay(p, t + h);
    const double d1 = (fp - fm) / (2.0 * h);
    const double d2 = (fp - 2.0 * f0 + fm) / (h * h);
    return (t * d2 + (1.0 + p.lambda1 * t) * d1 + (p.lambda1 - p.lambda2) * f0) / f0;
}

}  // namespace dvfp

#endif
