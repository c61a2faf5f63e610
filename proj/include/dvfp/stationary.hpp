#ifndef DVFP_STATIONARY_HPP
#define DVFP_STATIONARY_HPP

// Stationary state of the delay Fokker-Planck equation. The delay average of
// a stationary law is the law itself, so the stationary state is the one of
// the undelayed McKean-Vlasov equation:
//
//   mu(x, v) = rho(x) * Maxwellian_theta(v),   theta^2 = sigma / gamma,
//   rho = exp(-(Phi + U * rho) / theta^2) / Z.
//
// rho is computed on a uniform cell-centred grid over [-L, L]^d, d <= 2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dvfp/error.hpp"
#include "dvfp/model.hpp"
#include "dvfp/rng.hpp"
#include "dvfp/simulator.hpp"

namespace dvfp {

/// Velocity Maxwellian (2 pi theta^2)^{-d/2} exp(-|v|^2 / (2 theta^2)).
inline double maxwellian(std::span<const double> v, double theta2) {
    if (!(theta2 > 0.0)) throw InvalidInput("maxwellian: theta^2 must be positive");
    double r2 = 0.0;
    for (double x : v) r2 += x * x;
    const double d = static_cast<double>(v.size());
    return std::pow(2.0 * std::numbers::pi * theta2, -0.5 * d) * std::exp(-0.5 * r2 / theta2);
}

/// Cell-centred grid over [-L, L]^dim with m cells per axis.
class DensityGrid {
  public:
    DensityGrid(int dim, double L, std::size_t m) : dim_(dim), L_(L), m_(m) {
        if (dim < 1 || dim > 2) throw InvalidInput("DensityGrid: only dimensions 1 and 2 are supported");
        if (!(L > 0.0) || !std::isfinite(L)) throw InvalidInput("DensityGrid: L must be positive");
        if (m < 2 || m > 256) throw InvalidInput("DensityGrid: cells per axis must be in [2, 256]");
        delta_ = 2.0 * L / static_cast<double>(m);
    }

    int dim() const noexcept { return dim_; }
    double half_width() const noexcept { return L_; }
    std::size_t per_axis() const noexcept { return m_; }
    std::size_t size() const noexcept { return dim_ == 1 ? m_ : m_ * m_; }
    double delta() const noexcept { return delta_; }
    double cell_volume() const noexcept { return dim_ == 1 ? delta_ : delta_ * delta_; }
    double coord(std::size_t i) const { return -L_ + (static_cast<double>(i) + 0.5) * delta_; }

    /// Centre of flat cell index c; for dim 2, c = i * m + j with x = (coord(i), coord(j)).
    Point point(std::size_t c) const {
        if (dim_ == 1) return {coord(c)};
        return {coord(c / m_), coord(c % m_)};
    }

  private:
    int dim_;
    double L_;
    std::size_t m_;
    double delta_;
};

struct StationaryResult {
    DensityGrid grid{1, 1.0, 2};
    std::vector<double> rho;  ///< density values at cell centres, sum * cell_volume = 1
    double theta2 = 0.0;
    std::size_t iterations = 0;
    double residual = 0.0;     ///< sup |rho - T(rho)| at exit
    double boundary_mass = 0.0; ///< mass in the outermost ring of cells

    /// Marginal density on axis 0 (dim 2 only; returns rho for dim 1).
    std::vector<double> marginal() const {
        if (grid.dim() == 1) return rho;
        const std::size_t m = grid.per_axis();
        std::vector<double> out(m, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) out[i] += rho[i * m + j] * grid.delta();
        return out;
    }
};

namespace detail {

inline void check_potential_grid(const PotentialInstance& pot, const DensityGrid& grid) {
    if (pot.dimension != grid.dim()) throw InvalidInput("stationary: grid dimension differs from the potential's");
    if (!pot.phi) throw InvalidInput("stationary: confinement potential Phi is required");
}

/// (U * rho)(x_c) = sum_c' U(x_c - x_c') rho_c' dV, by direct summation.
inline std::vector<double> convolve_u(const PotentialInstance& pot, const DensityGrid& grid,
                                      std::span<const double> rho) {
    const std::size_t n = grid.size();
    std::vector<double> out(n, 0.0);
    if (!pot.u) return out;
    // U(x_c - x_c') depends only on index differences; tabulate once.
    const std::size_t m = grid.per_axis();
    const double delta = grid.delta();
    const std::size_t span = 2 * m - 1;
    std::vector<double> table(grid.dim() == 1 ? span : span * span);
    Point z(static_cast<std::size_t>(grid.dim()));
    if (grid.dim() == 1) {
        for (std::size_t a = 0; a < span; ++a) {
            z[0] = (static_cast<double>(a) - static_cast<double>(m - 1)) * delta;
            table[a] = pot.u(z);
        }
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += table[i + (m - 1) - j] * rho[j];
            out[i] = acc * delta;
        }
        return out;
    }
    for (std::size_t a = 0; a < span; ++a) {
        for (std::size_t b = 0; b < span; ++b) {
            z[0] = (static_cast<double>(a) - static_cast<double>(m - 1)) * delta;
            z[1] = (static_cast<double>(b) - static_cast<double>(m - 1)) * delta;
            table[a * span + b] = pot.u(z);
        }
    }
    const double vol = grid.cell_volume();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const double* row = table.data() + (i + (m - 1) - k) * span + (j + (m - 1));
                const double* r = rho.data() + k * m;
                for (std::size_t l = 0; l < m; ++l) acc += row[-static_cast<std::ptrdiff_t>(l)] * r[l];
            }
            out[i * m + j] = acc * vol;
        }
    }
    return out;
}

/// Gibbs map T(rho) = exp(-(Phi + U * rho) / theta^2) / Z on the grid.
inline std::vector<double> gibbs_map(const PotentialInstance& pot, const DensityGrid& grid,
                                     const std::vector<double>& phi_values, std::span<const double> rho,
                                     double theta2) {
    std::vector<double> e = convolve_u(pot, grid, rho);
    double lo = infinity;
    for (std::size_t c = 0; c < e.size(); ++c) {
        e[c] = (phi_values[c] + e[c]) / theta2;
        lo = std::min(lo, e[c]);
    }
    if (!std::isfinite(lo) || lo > 700.0) {
        throw InvalidInput("stationary: normalization underflows; box too small or potential too large");
    }
    double z = 0.0;
    for (double& v : e) {
        v = std::exp(-(v - lo));
        z += v;
    }
    z *= grid.cell_volume();
    for (double& v : e) v /= z;
    return e;
}

}  // namespace detail

struct FixedPointOptions {
    double damping = 0.5;
    double tol = 1e-10;
    std::size_t max_iter = 10000;
};

/// Damped fixed point rho <- (1 - damping) rho + damping T(rho), started from
/// the U = 0 Gibbs density. Throws ConvergenceError at the iteration cap.
inline StationaryResult fixed_point_rho(const PotentialInstance& pot, double theta2, const DensityGrid& grid,
                                        const FixedPointOptions& opt = {}) {
    detail::check_potential_grid(pot, grid);
    if (!(theta2 > 0.0) || !std::isfinite(theta2)) throw InvalidInput("fixed_point_rho: theta^2 must be positive");
    if (!(opt.damping > 0.0 && opt.damping <= 1.0)) throw InvalidInput("fixed_point_rho: damping must be in (0, 1]");

    const std::size_t n = grid.size();
    std::vector<double> phi_values(n);
    for (std::size_t c = 0; c < n; ++c) phi_values[c] = pot.phi(grid.point(c));

    StationaryResult res;
    res.grid = grid;
    res.theta2 = theta2;
    {
        PotentialInstance bare = pot;
        bare.u = nullptr;
        std::vector<double> none(n, 0.0);
        res.rho = detail::gibbs_map(bare, grid, phi_values, none, theta2);
    }
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        const std::vector<double> t = detail::gibbs_map(pot, grid, phi_values, res.rho, theta2);
        double r = 0.0;
        for (std::size_t c = 0; c < n; ++c) r = std::max(r, std::abs(t[c] - res.rho[c]));
        res.iterations = it;
        res.residual = r;
        if (r <= opt.tol) break;
        if (it == opt.max_iter) throw ConvergenceError("fixed_point_rho: iteration cap reached", r);
        double mass = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            res.rho[c] = (1.0 - opt.damping) * res.rho[c] + opt.damping * t[c];
            mass += res.rho[c];
        }
        mass *= grid.cell_volume();
        for (double& v : res.rho) v /= mass;
    }

    const std::size_t m = grid.per_axis();
    double edge = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        const bool outer = grid.dim() == 1 ? (c == 0 || c == m - 1)
                                           : (c / m == 0 || c / m == m - 1 || c % m == 0 || c % m == m - 1);
        if (outer) edge += res.rho[c];
    }
    res.boundary_mass = edge * grid.cell_volume();
    return res;
}

/// Free energy int theta^2 (log rho - 1) rho + int Phi rho + 1/2 int (U * rho) rho
/// by the grid quadrature. Requires an even interaction potential.
inline double free_energy(const PotentialInstance& pot, double theta2, const DensityGrid& grid,
                          std::span<const double> rho) {
    detail::check_potential_grid(pot, grid);
    if (!pot.u_even) throw InvalidInput("free_energy: interaction potential must be even");
    if (rho.size() != grid.size()) throw InvalidInput("free_energy: density has wrong size");
    if (!(theta2 > 0.0)) throw InvalidInput("free_energy: theta^2 must be positive");
    for (double r : rho) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidInput("free_energy: density must be finite and >= 0");
    }
    const std::vector<double> conv = detail::convolve_u(pot, grid, rho);
    double entropy = 0.0, confinement = 0.0, interaction = 0.0;
    for (std::size_t c = 0; c < rho.size(); ++c) {
        if (rho[c] == 0.0) continue;
        entropy += theta2 * (std::log(rho[c]) - 1.0) * rho[c];
        confinement += pot.phi(grid.point(c)) * rho[c];
        interaction += 0.5 * conv[c] * rho[c];
    }
    return (entropy + confinement + interaction) * grid.cell_volume();
}

/// Positions drawn from the grid density (piecewise constant on cells).
inline std::vector<double> sample_positions(const StationaryResult& res, std::size_t n, std::uint64_t seed) {
    const DensityGrid& g = res.grid;
    const std::size_t cells = g.size();
    std::vector<double> cdf(cells);
    double acc = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        acc += res.rho[c];
        cdf[c] = acc;
    }
    for (double& v : cdf) v /= acc;
    const CounterNormal rng(seed, 501);
    const auto d = static_cast<std::size_t>(g.dim());
    std::vector<double> X(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform(0, i);
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        const std::size_t c = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cells - 1);
        const Point centre = g.point(c);
        for (std::size_t k = 0; k < d; ++k) X[i * d + k] = centre[k] + (rng.uniform(1, i, k) - 0.5) * g.delta();
    }
    return X;
}

struct MomentDrift {
    std::string name;
    double at_start = 0.0;
    double at_end = 0.0;
    double se = 0.0;  ///< combined standard error of the difference
    double z() const { return se > 0.0 ? std::abs(at_end - at_start) / se : (at_end == at_start ? 0.0 : infinity); }
};

struct StationarityReport {
    std::vector<MomentDrift> moments;
    double velocity_variance_z = 0.0;  ///< |Var V_end - theta^2| / SE
    double max_z() const {
        double m = velocity_variance_z;
        for (const auto& x : moments) m = std::max(m, x.z());
        return m;
    }
};

namespace detail {

/// Sample mean and its standard error of per-particle values.
inline std::pair<double, double> mean_se(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, std::sqrt(s / (n - 1.0) / n)};
}

}  // namespace detail

/// Samples N particles from rho * Maxwellian, simulates to `config.t_final`
/// and compares low moments (per-component means and second moments of X and
/// V, and the X-V correlation) at the start and the end.
inline StationarityReport verify_stationarity(const StationaryResult& res, const DriftModel& model,
                                              const SimConfig& config) {
    if (model.dimension() != res.grid.dim()) throw InvalidInput("verify_stationarity: dimension mismatch");
    if (!(model.sigma() > 0.0)) throw InvalidInput("verify_stationarity: needs sigma > 0");
    const double theta2 = model.sigma() / model.gamma();
    if (std::abs(theta2 - res.theta2) > 1e-12 * theta2) {
        throw InvalidInput("verify_stationarity: density was computed for a different theta^2");
    }
    const std::size_t n = config.n;
    const auto d = static_cast<std::size_t>(model.dimension());
    std::vector<double> X0 = sample_positions(res, n, config.seed);
    std::vector<double> V0(n * d);
    const CounterNormal vgen(config.seed, 502);
    for (std::size_t j = 0; j < n * d; ++j) V0[j] = std::sqrt(theta2) * vgen.normal(0, j);

    SimConfig c = config;
    c.keep_snapshots = false;
    const RunResult r = run(c, model, fixed_sampler(X0, V0));
    const EnsembleState& s = r.final_state;

    StationarityReport rep;
    auto compare = [&](const std::string& name, auto&& per_particle) {
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = per_particle(std::span<const double>(X0.data() + i * d, d), std::span<const double>(V0.data() + i * d, d));
            b[i] = per_particle(s.x(i), s.v(i));
        }
        const auto [ma, sa] = detail::mean_se(a);
        const auto [mb, sb] = detail::mean_se(b);
        rep.moments.push_back({name, ma, mb, std::sqrt(sa * sa + sb * sb)});
        return std::pair{mb, sb};
    };
    double var_v = 0.0, var_v_se2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const std::string ax = std::to_string(k);
        compare("mean_x" + ax, [k](auto x, auto) { return x[k]; });
        compare("mean_v" + ax, [k](auto, auto v) { return v[k]; });
        compare("second_x" + ax, [k](auto x, auto) { return x[k] * x[k]; });
        const auto [m2, se2] = compare("second_v" + ax, [k](auto, auto v) { return v[k] * v[k]; });
        var_v += m2;
        var_v_se2 += se2 * se2;
        compare("xv" + ax, [k](auto x, auto v) { return x[k] * v[k]; });
    }
    var_v /= static_cast<double>(d);
    rep.velocity_variance_z = std::abs(var_v - theta2) / (std::sqrt(var_v_se2) / static_cast<double>(d));
    return rep;
}

}  // namespace dvfp

#endif
