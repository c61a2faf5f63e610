#ifndef DVFP_MODEL_HPP
#define DVFP_MODEL_HPP

// Drift functions of the kinetic particle system
//
//   dX = V dt
//   dV = A(X) dt + <delay-averaged B(X, .) against the spatial law> dt - gamma V dt + sqrt(2 sigma) dW
//
// with A(x) = -alpha x + g(x), g Lipschitz with constant c_g, and B Lipschitz
// in both arguments with constant c_B. The potential form A = -grad Phi,
// B(x, y) = -grad U(x - y) is provided through PotentialInstance.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dvfp/error.hpp"
#include "dvfp/rng.hpp"

namespace dvfp {

using Point = std::vector<double>;

namespace detail {

inline void require_finite(std::span<const double> x, const char* what) {
    for (double v : x) {
        if (!std::isfinite(v)) throw InvalidInput(std::string(what) + ": non-finite component");
    }
}

inline double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

inline double distance(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
    return std::sqrt(s);
}

}  // namespace detail

/// Lipschitz perturbation g of the linear confinement. An empty callable means g == 0.
struct Perturbation {
    std::function<void(std::span<const double> x, std::span<double> out)> apply;
    double lipschitz = 0.0;
};

/// Interaction B(x, source). An empty callable means B == 0.
///
/// `affine_in_source` declares that B(x, .) is affine, so the average of B
/// over a cloud of sources equals B at the cloud mean. The simulator uses this
/// to keep only the history of ensemble means.
struct InteractionKernel {
    std::function<void(std::span<const double> x, std::span<const double> source, std::span<double> out)> apply;
    double lipschitz = 0.0;
    bool affine_in_source = false;
};

struct DriftParams {
    int dimension = 1;
    double alpha = 1.0;
    Perturbation g;
    InteractionKernel B;
    double gamma = 1.0;
    double sigma = 0.0;
    double H = 0.0;  ///< delay cut-off, may be `infinity`
};

/// Immutable description of the drift, friction, noise and delay cut-off.
class DriftModel {
  public:
    explicit DriftModel(DriftParams p) : p_(std::move(p)) {
        if (p_.dimension < 1) throw InvalidInput("DriftModel: dimension must be >= 1");
        if (!(p_.alpha > 0.0) || !std::isfinite(p_.alpha)) throw InvalidInput("DriftModel: alpha must be positive");
        if (!(p_.gamma > 0.0) || !std::isfinite(p_.gamma)) throw InvalidInput("DriftModel: gamma must be positive");
        if (!(p_.sigma >= 0.0) || !std::isfinite(p_.sigma)) throw InvalidInput("DriftModel: sigma must be >= 0");
        if (!(p_.g.lipschitz >= 0.0)) throw InvalidInput("DriftModel: c_g must be >= 0");
        if (!(p_.B.lipschitz >= 0.0)) throw InvalidInput("DriftModel: c_B must be >= 0");
        if (!(p_.H >= 0.0)) throw InvalidInput("DriftModel: cut-off H must be in [0, inf]");
    }

    int dimension() const noexcept { return p_.dimension; }
    double alpha() const noexcept { return p_.alpha; }
    double gamma() const noexcept { return p_.gamma; }
    double sigma() const noexcept { return p_.sigma; }
    double cutoff() const noexcept { return p_.H; }
    double c_g() const noexcept { return p_.g.lipschitz; }
    double c_B() const noexcept { return p_.B.lipschitz; }
    /// Combined interaction strength c_g + 2 c_B entering the decay rates.
    double eta() const noexcept { return p_.g.lipschitz + 2.0 * p_.B.lipschitz; }

    bool has_perturbation() const noexcept { return static_cast<bool>(p_.g.apply); }
    bool has_interaction() const noexcept { return static_cast<bool>(p_.B.apply); }
    bool interaction_affine() const noexcept { return !has_interaction() || p_.B.affine_in_source; }

    const DriftParams& params() const noexcept { return p_; }

    DriftModel with_cutoff(double H) const {
        DriftParams q = p_;
        q.H = H;
        return DriftModel(std::move(q));
    }
    DriftModel with_noise(double sigma) const {
        DriftParams q = p_;
        q.sigma = sigma;
        return DriftModel(std::move(q));
    }
    DriftModel with_friction(double gamma) const {
        DriftParams q = p_;
        q.gamma = gamma;
        return DriftModel(std::move(q));
    }

    /// A(x) = -alpha x + g(x), unchecked.
    void eval_A_into(std::span<const double> x, std::span<double> out) const {
        if (p_.g.apply) {
            p_.g.apply(x, out);
        } else {
            std::fill(out.begin(), out.end(), 0.0);
        }
        for (std::size_t k = 0; k < x.size(); ++k) out[k] -= p_.alpha * x[k];
    }

    /// B(x, source), unchecked.
    void eval_B_into(std::span<const double> x, std::span<const double> source, std::span<double> out) const {
        if (p_.B.apply) {
            p_.B.apply(x, source, out);
        } else {
            std::fill(out.begin(), out.end(), 0.0);
        }
    }

    Point eval_A(std::span<const double> x) const {
        check_point(x);
        detail::require_finite(x, "eval_A");
        Point out(x.size());
        eval_A_into(x, out);
        return out;
    }

    Point eval_B(std::span<const double> x, std::span<const double> source) const {
        check_point(x);
        check_point(source);
        detail::require_finite(x, "eval_B");
        detail::require_finite(source, "eval_B");
        Point out(x.size());
        eval_B_into(x, source, out);
        return out;
    }

    /// Equivalent model with alpha = 1 under tau = sqrt(alpha) t.
    ///
    /// With Y(tau) = X(t) and W = dY/dtau = V / sqrt(alpha) the rescaled system
    /// has g' = g / alpha, B' = B / alpha, gamma' = gamma / sqrt(alpha),
    /// sigma' = sigma / alpha^{3/2} and H' = sqrt(alpha) H. The Lipschitz
    /// constants scale like g and B.
    DriftModel rescale_time() const {
        const double a = p_.alpha;
        if (a == 1.0) return *this;
        const double ra = std::sqrt(a);
        DriftParams q = p_;
        q.alpha = 1.0;
        q.gamma = p_.gamma / ra;
        q.sigma = p_.sigma / (a * ra);
        q.H = p_.H * ra;
        if (p_.g.apply) {
            q.g.apply = [g = p_.g.apply, a](std::span<const double> x, std::span<double> out) {
                g(x, out);
                for (double& v : out) v /= a;
            };
        }
        q.g.lipschitz = p_.g.lipschitz / a;
        if (p_.B.apply) {
            q.B.apply = [B = p_.B.apply, a](std::span<const double> x, std::span<const double> s, std::span<double> out) {
                B(x, s, out);
                for (double& v : out) v /= a;
            };
        }
        q.B.lipschitz = p_.B.lipschitz / a;
        return DriftModel(std::move(q));
    }

  private:
    void check_point(std::span<const double> x) const {
        if (x.size() != static_cast<std::size_t>(p_.dimension)) {
            throw InvalidInput("point dimension " + std::to_string(x.size()) + " does not match model dimension " +
                               std::to_string(p_.dimension));
        }
    }

    DriftParams p_;
};

/// Confinement and interaction potentials with analytic gradients.
struct PotentialInstance {
    std::string name;
    int dimension = 1;
    double alpha = 1.0;  ///< linear part of -grad Phi
    std::function<double(std::span<const double>)> phi;
    std::function<void(std::span<const double>, std::span<double>)> grad_phi;
    std::function<double(std::span<const double>)> u;                       ///< empty means U == 0
    std::function<void(std::span<const double>, std::span<double>)> grad_u;  ///< empty means U == 0
    double c_g = 0.0;
    double c_B = 0.0;
    bool u_even = true;
    bool interaction_affine = false;

    /// Drift model with A = -grad Phi and B(x, y) = -grad U(x - y).
    DriftModel drift(double gamma, double sigma, double H) const {
        DriftParams p;
        p.dimension = dimension;
        p.alpha = alpha;
        p.gamma = gamma;
        p.sigma = sigma;
        p.H = H;
        p.g.lipschitz = c_g;
        if (grad_phi) {
            p.g.apply = [gp = grad_phi, a = alpha](std::span<const double> x, std::span<double> out) {
                gp(x, out);
                for (std::size_t k = 0; k < x.size(); ++k) out[k] = a * x[k] - out[k];
            };
        }
        p.B.lipschitz = c_B;
        p.B.affine_in_source = interaction_affine;
        if (grad_u) {
            p.B.apply = [gu = grad_u](std::span<const double> x, std::span<const double> s, std::span<double> out) {
                double diff[8];
                std::vector<double> heap;
                double* dp = diff;
                if (x.size() > 8) {
                    heap.resize(x.size());
                    dp = heap.data();
                }
                for (std::size_t k = 0; k < x.size(); ++k) dp[k] = x[k] - s[k];
                gu(std::span<const double>(dp, x.size()), out);
                for (double& v : out) v = -v;
            };
        }
        return DriftModel(std::move(p));
    }

    double eval_u(std::span<const double> x) const { return u ? u(x) : 0.0; }
};

/// Named confinement potentials.
///   "quadratic"         Phi = alpha |x|^2 / 2
///   "quadratic+cosine"  Phi = alpha |x|^2 / 2 + eps sum_k cos(x_k),  c_g = eps
///   "quartic"           Phi = alpha |x|^2 / 2 + eps |x|^4 / 4, c_g = 3 eps R^2 on the ball |x| <= R
/// Named interaction potentials use the same names with strength c for the
/// quadratic part ("none" for U == 0):
///   "quadratic"         U = c |x|^2 / 2,                       c_B = c (affine kernel)
///   "quadratic+cosine"  U = c |x|^2 / 2 + eps sum_k cos(x_k),  c_B = c + eps
///   "quartic"           U = eps |x|^4 / 4,                      c_B = 12 eps R^2 on |x|, |y| <= R
/// These instances are choices of this library; any Phi, U with the stated
/// structure can be supplied in code.
struct PotentialSpec {
    int dimension = 2;
    double alpha = 1.0;
    std::string confinement = "quadratic";
    double confinement_eps = 0.0;
    std::string interaction = "none";
    double interaction_c = 0.0;
    double interaction_eps = 0.0;
    double box = 5.0;  ///< half-width R of the cube [-R, R]^d on which quartic Lipschitz constants hold
};

inline PotentialInstance make_potential(const PotentialSpec& s) {
    if (s.dimension < 1) throw InvalidInput("potential: dimension must be >= 1");
    if (!(s.alpha > 0.0)) throw InvalidInput("potential: alpha must be positive");
    if (s.confinement_eps < 0.0 || s.interaction_c < 0.0 || s.interaction_eps < 0.0) {
        throw InvalidInput("potential: strengths must be nonnegative");
    }
    PotentialInstance p;
    p.name = s.confinement + "/" + s.interaction;
    p.dimension = s.dimension;
    p.alpha = s.alpha;
    const double a = s.alpha;
    const double e = s.confinement_eps;
    if (s.confinement == "quadratic") {
        p.phi = [a](std::span<const double> x) {
            double n = detail::norm(x);
            return 0.5 * a * n * n;
        };
        p.grad_phi = [a](std::span<const double> x, std::span<double> out) {
            for (std::size_t k = 0; k < x.size(); ++k) out[k] = a * x[k];
        };
    } else if (s.confinement == "quadratic+cosine") {
        p.phi = [a, e](std::span<const double> x) {
            double v = 0.0;
            for (double xk : x) v += 0.5 * a * xk * xk + e * std::cos(xk);
            return v;
        };
        p.grad_phi = [a, e](std::span<const double> x, std::span<double> out) {
            for (std::size_t k = 0; k < x.size(); ++k) out[k] = a * x[k] - e * std::sin(x[k]);
        };
        p.c_g = e;
    } else if (s.confinement == "quartic") {
        p.phi = [a, e](std::span<const double> x) {
            double r2 = 0.0;
            for (double xk : x) r2 += xk * xk;
            return 0.5 * a * r2 + 0.25 * e * r2 * r2;
        };
        p.grad_phi = [a, e](std::span<const double> x, std::span<double> out) {
            double r2 = 0.0;
            for (double xk : x) r2 += xk * xk;
            for (std::size_t k = 0; k < x.size(); ++k) out[k] = a * x[k] + e * r2 * x[k];
        };
        p.c_g = 3.0 * e * s.dimension * s.box * s.box;  // |x|^2 <= d R^2 on the cube
    } else {
        throw InvalidInput("unknown confinement potential '" + s.confinement + "'");
    }

    const double c = s.interaction_c;
    const double ei = s.interaction_eps;
    if (s.interaction == "none") {
        p.interaction_affine = true;
    } else if (s.interaction == "quadratic") {
        p.u = [c](std::span<const double> x) {
            double n = detail::norm(x);
            return 0.5 * c * n * n;
        };
        p.grad_u = [c](std::span<const double> x, std::span<double> out) {
            for (std::size_t k = 0; k < x.size(); ++k) out[k] = c * x[k];
        };
        p.c_B = c;
        p.interaction_affine = true;
    } else if (s.interaction == "quadratic+cosine") {
        p.u = [c, ei](std::span<const double> x) {
            double v = 0.0;
            for (double xk : x) v += 0.5 * c * xk * xk + ei * std::cos(xk);
            return v;
        };
        p.grad_u = [c, ei](std::span<const double> x, std::span<double> out) {
            for (std::size_t k = 0; k < x.size(); ++k) out[k] = c * x[k] - ei * std::sin(x[k]);
        };
        p.c_B = c + ei;
    } else if (s.interaction == "quartic") {
        p.u = [ei](std::span<const double> x) {
            double r2 = 0.0;
            for (double xk : x) r2 += xk * xk;
            return 0.25 * ei * r2 * r2;
        };
        p.grad_u = [ei](std::span<const double> x, std::span<double> out) {
            double r2 = 0.0;
            for (double xk : x) r2 += xk * xk;
            for (std::size_t k = 0; k < x.size(); ++k) out[k] = ei * r2 * x[k];
        };
        p.c_B = 12.0 * ei * s.dimension * s.box * s.box;  // |x - y|^2 <= 4 d R^2
    } else {
        throw InvalidInput("unknown interaction potential '" + s.interaction + "'");
    }
    return p;
}

/// Largest sampled Lipschitz quotients of g and B over pairs in [-box, box]^d.
struct LipschitzAudit {
    double max_quotient_g = 0.0;
    double max_quotient_B = 0.0;
    bool within(const DriftModel& m, double rel = 1e-9) const {
        return max_quotient_g <= m.c_g() * (1.0 + rel) + 1e-300 && max_quotient_B <= m.c_B() * (1.0 + rel) + 1e-300;
    }
};

inline LipschitzAudit audit_lipschitz(const DriftModel& m, double box, std::size_t pairs = 10000,
                                      std::uint64_t seed = 1) {
    const auto d = static_cast<std::size_t>(m.dimension());
    CounterNormal rng(seed, 77);
    auto draw = [&](std::size_t i, std::size_t slot, Point& p) {
        for (std::size_t k = 0; k < d; ++k) p[k] = box * (2.0 * rng.uniform(i, slot * d + k) - 1.0);
    };
    Point x(d), y(d), xh(d), yh(d), o1(d), o2(d), o3(d);
    LipschitzAudit out;
    const auto& g = m.params().g;
    for (std::size_t i = 0; i < pairs; ++i) {
        draw(i, 0, x);
        draw(i, 1, y);
        draw(i, 2, xh);
        draw(i, 3, yh);
        if (g.apply) {
            g.apply(x, o1);
            g.apply(y, o2);
            const double q = detail::distance(o1, o2) / detail::distance(x, y);
            out.max_quotient_g = std::max(out.max_quotient_g, q);
        }
        if (m.has_interaction()) {
            m.eval_B_into(x, xh, o1);
            m.eval_B_into(y, xh, o2);
            m.eval_B_into(x, yh, o3);
            const double lhs = detail::distance(o1, o2) + detail::distance(o1, o3);
            const double rhs = detail::distance(x, y) + detail::distance(xh, yh);
            out.max_quotient_B = std::max(out.max_quotient_B, lhs / rhs);
        }
    }
    return out;
}

/// Largest relative mismatch between analytic and central-difference
/// gradients of Phi and U over sampled points in [-box, box]^d.
inline double audit_gradients(const PotentialInstance& p, double box, std::size_t points = 200,
                              double step = 1e-5, std::uint64_t seed = 3) {
    const auto d = static_cast<std::size_t>(p.dimension);
    CounterNormal rng(seed, 91);
    Point x(d), xp(d), xm(d), g(d);
    double worst = 0.0;
    auto check = [&](const auto& f, const auto& grad) {
        grad(x, g);
        double scale = std::max(1.0, detail::norm(g));
        for (std::size_t k = 0; k < d; ++k) {
            xp = x;
            xm = x;
            xp[k] += step;
            xm[k] -= step;
            const double fd = (f(xp) - f(xm)) / (2.0 * step);
            worst = std::max(worst, std::abs(fd - g[k]) / scale);
        }
    };
    for (std::size_t i = 0; i < points; ++i) {
        for (std::size_t k = 0; k < d; ++k) x[k] = box * (2.0 * rng.uniform(i, k) - 1.0);
        if (p.phi && p.grad_phi) check(p.phi, p.grad_phi);
        if (p.u && p.grad_u) check(p.u, p.grad_u);
    }
    return worst;
}

}  // namespace dvfp

#endif
