#ifndef DVFP_VERIFY_HPP
#define DVFP_VERIFY_HPP

// Numerical cross-checks of the comparison equations, the differential
// inequality for the coupled Lyapunov functional, and the Picard map that
// constructs the delay McKean-Vlasov solution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "dvfp/error.hpp"
#include "dvfp/kummer.hpp"
#include "dvfp/metrics.hpp"
#include "dvfp/model.hpp"
#include "dvfp/simulator.hpp"
#include "dvfp/trace.hpp"

namespace dvfp {

/// Values of the solution on [t0 - H, t0]; called with s <= t0.
using ScalarHistory = std::function<double(double s)>;

inline ScalarHistory constant_history(double y0) {
    return [y0](double) { return y0; };
}

/// y0 e^{-lambda (s - t0)}: the history for which y0 e^{-lambda (t - t0)} is
/// an exact solution when lambda is the Halanay rate.
inline ScalarHistory exponential_history(double y0, double t0, double lambda) {
    return [=](double s) { return y0 * std::exp(-lambda * (s - t0)); };
}

/// Heun integration of y' = -a y + b sup_{[t-H, t]} y on [t0, T] with the
/// given past on [t0 - H, t0] (constant y0 by default). The running supremum
/// of the piecewise linear interpolant is kept with a monotone deque.
inline DecayTrace halanay_compare_solve(double a, double b, double H, double y0, double t0, double T, double dt,
                                        const ScalarHistory& history = {}) {
    if (!(a > 0.0) || !(b >= 0.0)) throw InvalidInput("halanay_compare_solve: need a > 0, b >= 0");
    if (!(H >= 0.0) || std::isinf(H)) throw InvalidInput("halanay_compare_solve: H must be finite and >= 0");
    if (!(dt > 0.0)) throw InvalidInput("halanay_compare_solve: dt must be positive");
    if (H > 0.0 && dt > H) throw InvalidInput("halanay_compare_solve: step larger than the delay window");
    if (!(T >= t0)) throw InvalidInput("halanay_compare_solve: need T >= t0");
    const ScalarHistory past = history ? history : constant_history(y0);

    // Grid values t_k = t0 + (k - K) dt, k = 0.. ; indices < K are the past.
    const auto K = static_cast<std::size_t>(std::ceil(H / dt - 1e-9));
    std::vector<double> val;
    auto time_of = [&](std::size_t k) { return t0 + (static_cast<double>(k) - static_cast<double>(K)) * dt; };
    for (std::size_t k = 0; k < K; ++k) val.push_back(past(time_of(k)));
    val.push_back(y0);

    std::deque<std::size_t> window;  // indices with decreasing values
    auto push_index = [&](std::size_t k) {
        while (!window.empty() && val[window.back()] <= val[k]) window.pop_back();
        window.push_back(k);
    };
    auto interp = [&](double s) {
        // s >= time_of(0) up to rounding
        const double rel = std::max(0.0, (s - time_of(0)) / dt);
        const auto k = static_cast<std::size_t>(std::floor(rel));
        if (k + 1 >= val.size()) return val.back();
        const double w = rel - static_cast<double>(k);
        return (1.0 - w) * val[k] + w * val[k + 1];
    };
    // Supremum over [lo, latest grid point] together with `extra`.
    auto sup_from = [&](double lo, double extra) {
        const double tol = 1e-12 * std::max(1.0, std::abs(lo));
        while (!window.empty() && time_of(window.front()) < lo - tol) window.pop_front();
        double s = std::max(extra, interp(lo));
        if (!window.empty()) s = std::max(s, val[window.front()]);
        return s;
    };
    for (std::size_t k = 0; k <= K; ++k) push_index(k);

    DecayTrace out("y");
    out.push(t0, y0);
    const auto steps = static_cast<std::size_t>(std::llround((T - t0) / dt));
    for (std::size_t n = 0; n < steps; ++n) {
        const std::size_t cur = K + n;
        const double t = time_of(cur);
        const double y = val[cur];
        const double s1 = H == 0.0 ? y : sup_from(t - H, y);
        const double k1 = -a * y + b * s1;
        const double pred = y + dt * k1;
        const double s2 = H == 0.0 ? pred : sup_from(t + dt - H, pred);
        const double k2 = -a * pred + b * s2;
        const double next = y + 0.5 * dt * (k1 + k2);
        if (!std::isfinite(next)) throw Divergence("halanay_compare_solve: non-finite solution", n + 1);
        val.push_back(next);
        push_index(cur + 1);
        out.push(t + dt, next);
    }
    return out;
}

/// The infinite-delay comparison equation, integrated directly.
inline DecayTrace integro_compare_solve(double lambda1, double lambda2, double y0, double t0, double T, double dt,
                                        std::size_t record_every = 1) {
    return integro_ode_solve(lambda1, lambda2, y0, t0, T, dt, record_every);
}

struct InequalityOptions {
    bool sup_form = false;       ///< compare against the supremum instead of the average
    double slack_abs = 0.0;      ///< fixed tolerance added to every check
    double se_multiplier = 3.0;  ///< multiples of the batch standard error added to the slack
};

struct InequalityReport {
    std::size_t checked = 0;
    std::size_t violations = 0;
    double max_excess = -infinity;  ///< largest residual minus slack
    double max_residual_rel = -infinity;  ///< largest residual divided by J
    double fraction() const { return checked ? static_cast<double>(violations) / static_cast<double>(checked) : 0.0; }
};

namespace detail {

/// Running trapezoid integral of a trace, C[k] = int_{t_0}^{t_k} J ds.
inline std::vector<double> cumulative_trapezoid(const DecayTrace& J) {
    std::vector<double> c(J.size(), 0.0);
    for (std::size_t k = 1; k < J.size(); ++k)
        c[k] = c[k - 1] + 0.5 * (J.time(k) - J.time(k - 1)) * (J.value(k) + J.value(k - 1));
    return c;
}

/// Residual dJ/dt + lambda1 J - lambda2 <J over the delay window> at interior
/// trace index m, with a central difference in time.
inline double inequality_residual(const DecayTrace& J, const std::vector<double>& cum, std::size_t m, double lambda1,
                                  double lambda2, double H, bool sup_form) {
    const double t = J.time(m);
    const double dJ = (J.value(m + 1) - J.value(m - 1)) / (J.time(m + 1) - J.time(m - 1));
    const double h = cutoff_h(t - J.time(0), H);
    double memory = J.value(m);
    if (h > 0.0) {
        const double lo = t - h;
        // last index k with t_k <= lo
        std::size_t k = static_cast<std::size_t>(
            std::upper_bound(J.times().begin(), J.times().begin() + static_cast<std::ptrdiff_t>(m), lo) -
            J.times().begin());
        k = k == 0 ? 0 : k - 1;
        const double lv = J.at(lo);
        if (sup_form) {
            memory = lv;
            for (std::size_t j = k + 1; j <= m; ++j) memory = std::max(memory, J.value(j));
        } else {
            const double c_lo = cum[k] + 0.5 * (lo - J.time(k)) * (J.value(k) + lv);
            memory = (cum[m] - c_lo) / h;
        }
    }
    return dJ + lambda1 * J.value(m) - lambda2 * memory;
}

}  // namespace detail

/// Checks dJ/dt <= -lambda1 J + lambda2 (1/h) int_{t-h}^t J ds on a recorded
/// trace. With batch traces, the slack at each time includes `se_multiplier`
/// standard errors of the batch residuals.
inline InequalityReport check_inequality(const DecayTrace& J, double lambda1, double lambda2, double H,
                                         const std::vector<DecayTrace>& batches = {},
                                         const InequalityOptions& opt = {}) {
    if (J.size() < 3) throw InvalidInput("check_inequality: trace needs at least 3 points");
    for (const auto& b : batches) {
        if (b.size() != J.size()) throw InvalidInput("check_inequality: batch traces must match the trace length");
    }
    InequalityReport rep;
    std::vector<double> rb(batches.size());
    const std::vector<double> cum = detail::cumulative_trapezoid(J);
    std::vector<std::vector<double>> bcum;
    for (const auto& b : batches) bcum.push_back(detail::cumulative_trapezoid(b));
    for (std::size_t m = 1; m + 1 < J.size(); ++m) {
        const double r = detail::inequality_residual(J, cum, m, lambda1, lambda2, H, opt.sup_form);
        double slack = opt.slack_abs;
        if (batches.size() >= 2) {
            double mean = 0.0;
            for (std::size_t k = 0; k < batches.size(); ++k) {
                rb[k] = detail::inequality_residual(batches[k], bcum[k], m, lambda1, lambda2, H, opt.sup_form);
                mean += rb[k];
            }
            const double nb = static_cast<double>(batches.size());
            mean /= nb;
            double var = 0.0;
            for (double x : rb) var += (x - mean) * (x - mean);
            slack += opt.se_multiplier * std::sqrt(var / (nb - 1.0) / nb);
        }
        ++rep.checked;
        if (r > slack) ++rep.violations;
        rep.max_excess = std::max(rep.max_excess, r - slack);
        if (J.value(m) > 0.0) rep.max_residual_rel = std::max(rep.max_residual_rel, r / J.value(m));
    }
    return rep;
}

/// History of a frozen family of laws, sampled at `spacing` from t = 0.
inline HistoryBuffer frozen_history(const DriftModel& model, const std::vector<Snapshot>& frozen, double spacing) {
    if (frozen.empty()) throw InvalidInput("picard: frozen history is empty");
    const std::size_t nd = frozen.front().X.size();
    const auto d = static_cast<std::size_t>(model.dimension());
    if (nd % d != 0) throw InvalidInput("picard: frozen snapshot has wrong shape");
    const auto content = model.interaction_affine() ? HistoryBuffer::Content::means : HistoryBuffer::Content::positions;
    HistoryBuffer buf(content, nd / d, d, spacing, 0);
    for (std::size_t k = 0; k < frozen.size(); ++k) {
        const double expect = static_cast<double>(k) * spacing;
        if (std::abs(frozen[k].t - expect) > 1e-9 * std::max(1.0, expect)) {
            throw InvalidInput("picard: frozen snapshots must be spaced uniformly from t = 0");
        }
        buf.push(frozen[k].t, frozen[k].X);
    }
    return buf;
}

/// One application of the Picard map: the ensemble is driven by the delay
/// interaction of the frozen laws instead of its own. Returns snapshots at
/// every `stride`-th step, which must match the frozen snapshot times.
inline std::vector<Snapshot> picard_iterate(const SimConfig& config, const DriftModel& model,
                                            const std::vector<Snapshot>& frozen, const InitSampler& init) {
    config.validate();
    const double spacing = config.dt * static_cast<double>(config.stride);
    const HistoryBuffer sources = frozen_history(model, frozen, spacing);
    if (!sources.covers(0.0, config.t_final)) throw InvalidInput("picard: frozen history does not cover [0, T]");
    EnsembleState s = detail::make_state(config, model, init);
    std::vector<Snapshot> out;
    out.push_back({s.t, s.X, s.V});
    const CounterNormal gen(config.seed);
    std::vector<double> noise(s.n * s.d), scratch;
    const std::size_t steps = config.steps();
    for (std::size_t k = 0; k < steps; ++k) {
        draw_noise(gen, k, noise);
        step(model, s, sources, false, nullptr, config.dt, noise, scratch);
        if (s.step % config.stride == 0) out.push_back({s.t, s.X, s.V});
    }
    return out;
}

/// sup over recorded times of (1/N) sum_i |Z_i - Z'_i|^2 under the index
/// coupling, an upper bound for the squared Wasserstein-2 distance.
inline double coupled_sup_distance2(const std::vector<Snapshot>& a, const std::vector<Snapshot>& b, std::size_t n) {
    if (a.size() != b.size()) throw InvalidInput("picard: iterates have different lengths");
    double worst = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a[k].X.size(); ++j) {
            const double dx = a[k].X[j] - b[k].X[j];
            const double dv = a[k].V[j] - b[k].V[j];
            acc += dx * dx + dv * dv;
        }
        worst = std::max(worst, acc / static_cast<double>(n));
    }
    return worst;
}

struct PicardTrace {
    std::vector<double> distances;  ///< distances[k] between iterates k + 1 and k
    std::vector<Snapshot> final_iterate;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Picard iteration from the static initial law (every frozen snapshot equal
/// to the initial ensemble) until the sup-in-time distance between
/// successive iterates falls to `tol` or `k_max` iterates are built.
inline PicardTrace picard_converge(const SimConfig& config, const DriftModel& model, const InitSampler& init,
                                   std::size_t k_max, double tol) {
    config.validate();
    if (k_max < 1) throw InvalidInput("picard_converge: k_max must be >= 1");
    const EnsembleState s0 = detail::make_state(config, model, init);
    const std::size_t records = config.steps() / config.stride + 1;
    const double spacing = config.dt * static_cast<double>(config.stride);
    std::vector<Snapshot> current(records);
    for (std::size_t k = 0; k < records; ++k) current[k] = {static_cast<double>(k) * spacing, s0.X, s0.V};

    PicardTrace out;
    for (std::size_t k = 0; k < k_max; ++k) {
        std::vector<Snapshot> next = picard_iterate(config, model, current, init);
        out.distances.push_back(coupled_sup_distance2(next, current, s0.n));
        current = std::move(next);
        out.iterations = k + 1;
        if (out.distances.back() <= tol) {
            out.converged = true;
            break;
        }
    }
    out.final_iterate = std::move(current);
    return out;
}

}  // namespace dvfp

#endif
