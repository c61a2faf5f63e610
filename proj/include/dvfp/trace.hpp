#ifndef DVFP_TRACE_HPP
#define DVFP_TRACE_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dvfp/error.hpp"

namespace dvfp {

/// Time series of a scalar functional (a Lyapunov functional, a distance
/// estimate, or the solution of a comparison equation).
class DecayTrace {
  public:
    DecayTrace() = default;
    explicit DecayTrace(std::string name) : name_(std::move(name)) {}
    DecayTrace(std::string name, std::vector<double> times, std::vector<double> values)
        : name_(std::move(name)), times_(std::move(times)), values_(std::move(values)) {
        if (times_.size() != values_.size()) throw InvalidInput("DecayTrace: times and values differ in length");
        for (std::size_t i = 1; i < times_.size(); ++i) {
            if (!(times_[i] > times_[i - 1])) throw InvalidInput("DecayTrace: times must be strictly increasing");
        }
    }

    void push(double t, double value) {
        if (!times_.empty() && !(t > times_.back())) throw InvalidInput("DecayTrace: times must be strictly increasing");
        times_.push_back(t);
        values_.push_back(value);
    }

    const std::string& name() const noexcept { return name_; }
    void set_name(std::string n) { name_ = std::move(n); }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return times_.size(); }
    bool empty() const noexcept { return times_.empty(); }
    double time(std::size_t i) const { return times_.at(i); }
    double value(std::size_t i) const { return values_.at(i); }

    /// Linear interpolation; clamps outside the covered range.
    double at(double t) const {
        if (times_.empty()) throw InvalidInput("DecayTrace: empty");
        if (t <= times_.front()) return values_.front();
        if (t >= times_.back()) return values_.back();
        std::size_t lo = 0, hi = times_.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (times_[mid] <= t ? lo : hi) = mid;
        }
        const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
        return (1.0 - w) * values_[lo] + w * values_[hi];
    }

  private:
    std::string name_;
    std::vector<double> times_;
    std::vector<double> values_;
};

/// Ordinary least-squares line y = intercept + slope x.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;  ///< standard error of the slope
    double r2 = 0.0;
    std::size_t points = 0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidInput("fit_line: size mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw InvalidInput("fit_line: need at least 3 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw InvalidInput("fit_line: degenerate abscissae");
    LineFit f;
    f.points = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        sse += r * r;
    }
    f.slope_se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
    f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    return f;
}

/// Exponential fit log J = c - rate t on the part of the trace with
/// t in [t_lo, t_hi] and J > floor. The returned slope is the decay rate
/// (positive for decaying traces).
struct RateFit {
    double rate = 0.0;
    double rate_se = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;
};

inline RateFit fit_exponential_rate(const DecayTrace& trace, double t_lo, double t_hi, double floor) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double t = trace.time(i);
        const double v = trace.value(i);
        if (t < t_lo || t > t_hi) continue;
        if (!(v > floor)) break;  // first drop below the floor ends the window
        x.push_back(t);
        y.push_back(std::log(v));
    }
    const LineFit f = fit_line(x, y);
    return {-f.slope, f.slope_se, f.r2, f.points};
}

/// Power-law fit log J = c + slope log t on t in [t_lo, t_hi].
inline LineFit fit_power_law(const DecayTrace& trace, double t_lo, double t_hi) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double t = trace.time(i);
        if (t < t_lo || t > t_hi) continue;
        const double v = trace.value(i);
        if (!(v > 0.0) || !(t > 0.0)) throw InvalidInput("fit_power_law: trace must be positive on the window");
        x.push_back(std::log(t));
        y.push_back(std::log(v));
    }
    return fit_line(x, y);
}

}  // namespace dvfp

#endif
