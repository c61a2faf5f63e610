#ifndef DVFP_SIMULATOR_HPP
#define DVFP_SIMULATOR_HPP

// Euler-Maruyama integration of the N-particle delay system
//
//   dX^i = V^i dt
//   dV^i = A(X^i) dt + (1/N) sum_j (1/h(t)) int_{t-h(t)}^t B(X^i_t, X^j_s) ds dt - gamma V^i dt + sqrt(2 sigma) dW^i
//
// with the cut-off h(t) = min(t, H). The j = i term is part of the sum. At
// h(t) = 0 the time average is replaced by its limit, the instantaneous
// interaction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dvfp/error.hpp"
#include "dvfp/metrics.hpp"
#include "dvfp/model.hpp"
#include "dvfp/rng.hpp"
#include "dvfp/trace.hpp"

namespace dvfp {

/// Length of the delay window at time t for cut-off H in [0, inf].
inline double cutoff_h(double t, double H) {
    if (!(t >= 0.0)) throw InvalidInput("cutoff_h: time must be nonnegative");
    if (!(H >= 0.0)) throw InvalidInput("cutoff_h: cut-off must be in [0, inf]");
    return t <= H ? t : H;
}

/// Step size bound min(0.01, 0.1/gamma, 0.1/sqrt(alpha)).
inline double default_dt(const DriftModel& m) {
    return std::min({0.01, 0.1 / m.gamma(), 0.1 / std::sqrt(m.alpha())});
}

enum class HistoryPolicy { windowed, full };

struct SimConfig {
    double dt = 1e-3;
    double t_final = 1.0;
    std::size_t n = 100;
    std::uint64_t seed = 1;
    HistoryPolicy history = HistoryPolicy::windowed;
    std::size_t stride = 1;
    bool keep_snapshots = true;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("SimConfig: dt must be positive");
        if (!(t_final >= 0.0) || !std::isfinite(t_final)) throw InvalidInput("SimConfig: t_final must be >= 0");
        if (n < 1) throw InvalidInput("SimConfig: n must be >= 1");
        if (stride < 1) throw InvalidInput("SimConfig: stride must be >= 1");
    }
    std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_final / dt)); }
};

/// Positions and velocities of N particles in R^d, stored row-major (N x d).
struct EnsembleState {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t step = 0;
    double t = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> X;
    std::vector<double> V;

    EnsembleState() = default;
    EnsembleState(std::size_t n_, std::size_t d_, std::uint64_t seed_ = 0)
        : n(n_), d(d_), seed(seed_), X(n_ * d_, 0.0), V(n_ * d_, 0.0) {
        if (n_ < 1 || d_ < 1) throw InvalidInput("EnsembleState: need n >= 1 and d >= 1");
    }

    std::span<const double> x(std::size_t i) const { return {X.data() + i * d, d}; }
    std::span<const double> v(std::size_t i) const { return {V.data() + i * d, d}; }
    std::span<double> x(std::size_t i) { return {X.data() + i * d, d}; }
    std::span<double> v(std::size_t i) { return {V.data() + i * d, d}; }

    void validate() const {
        if (X.size() != n * d || V.size() != n * d) throw InvalidInput("EnsembleState: X and V must be N x d");
        for (std::size_t k = 0; k < X.size(); ++k) {
            if (!std::isfinite(X[k]) || !std::isfinite(V[k])) throw InvalidInput("EnsembleState: non-finite entry");
        }
    }

    Point mean_position() const {
        Point m(d, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < d; ++k) m[k] += X[i * d + k];
        for (double& v : m) v /= static_cast<double>(n);
        return m;
    }
};

/// Uniformly spaced past of an ensemble, enough to evaluate the delay average.
///
/// `means` keeps only the ensemble mean and its running trapezoid integral,
/// which is exact for kernels affine in the source point. `positions` keeps
/// full N x d snapshots.
class HistoryBuffer {
  public:
    enum class Content { means, positions };

    HistoryBuffer(Content content, std::size_t n, std::size_t d, double spacing, std::size_t capacity)
        : content_(content), n_(n), d_(d), spacing_(spacing), capacity_(capacity) {
        if (!(spacing > 0.0)) throw InvalidInput("HistoryBuffer: spacing must be positive");
        if (capacity_ != 0 && capacity_ < 2) capacity_ = 2;
    }

    /// Buffer sized for the model's cut-off: ceil(H/dt) + 2 snapshots for a
    /// finite window, everything for H = inf or the `full` policy.
    static HistoryBuffer for_model(const DriftModel& m, const SimConfig& c, std::size_t n) {
        const Content content = m.interaction_affine() ? Content::means : Content::positions;
        std::size_t cap = 0;
        if (c.history == HistoryPolicy::windowed && std::isfinite(m.cutoff())) {
            cap = static_cast<std::size_t>(std::ceil(m.cutoff() / c.dt - 1e-9)) + 2;
        }
        return HistoryBuffer(content, n, static_cast<std::size_t>(m.dimension()), c.dt, cap);
    }

    Content content() const noexcept { return content_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool empty() const noexcept { return nodes_.empty(); }
    double spacing() const noexcept { return spacing_; }
    std::size_t capacity() const noexcept { return capacity_; }
    double earliest() const { return nodes_.front().t; }
    double latest() const { return nodes_.back().t; }
    double time(std::size_t k) const { return nodes_.at(k).t; }

    /// Append the snapshot X (N x d) taken at time t = latest() + spacing.
    void push(double t, std::span<const double> X) {
        if (X.size() != n_ * d_) throw InvalidInput("HistoryBuffer: snapshot has wrong shape");
        if (!nodes_.empty()) {
            const double expect = nodes_.back().t + spacing_;
            if (!(t > nodes_.back().t) || std::abs(t - expect) > 1e-9 * std::max(1.0, std::abs(t))) {
                throw InternalError("HistoryBuffer: snapshots must be spaced by exactly one step");
            }
        }
        Node node;
        node.t = t;
        node.mean.assign(d_, 0.0);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = 0; k < d_; ++k) node.mean[k] += X[i * d_ + k];
        for (double& v : node.mean) v /= static_cast<double>(n_);
        if (nodes_.empty()) {
            node.cumulative.assign(d_, 0.0);
        } else {
            const Node& prev = nodes_.back();
            node.cumulative.resize(d_);
            for (std::size_t k = 0; k < d_; ++k)
                node.cumulative[k] = prev.cumulative[k] + 0.5 * (t - prev.t) * (prev.mean[k] + node.mean[k]);
        }
        if (content_ == Content::positions) node.X.assign(X.begin(), X.end());
        nodes_.push_back(std::move(node));
        if (capacity_ != 0 && nodes_.size() > capacity_) nodes_.pop_front();
    }

    bool covers(double lo, double hi) const {
        if (nodes_.empty()) return false;
        const double tol = 1e-9 * std::max(1.0, std::abs(hi));
        return lo >= earliest() - tol && hi <= latest() + tol && lo <= hi + tol;
    }

    /// Ensemble mean at time s (linear interpolation between snapshots).
    Point mean_at(double s) const {
        require(s, s);
        const auto [k, w] = locate(s);
        Point m(d_);
        const Node& a = nodes_[k];
        if (w == 0.0) return a.mean;
        const Node& b = nodes_[k + 1];
        for (std::size_t c = 0; c < d_; ++c) m[c] = (1.0 - w) * a.mean[c] + w * b.mean[c];
        return m;
    }

    /// (1/(hi-lo)) int_lo^hi mean(s) ds for the piecewise linear mean; the
    /// mean at `hi` when the window is empty.
    Point window_mean(double lo, double hi) const {
        require(lo, hi);
        if (hi - lo <= 1e-12 * spacing_) return mean_at(hi);
        const Point c_hi = cumulative_at(hi);
        const Point c_lo = cumulative_at(lo);
        Point out(d_);
        for (std::size_t k = 0; k < d_; ++k) out[k] = (c_hi[k] - c_lo[k]) / (hi - lo);
        return out;
    }

    /// Snapshot at time s, interpolated linearly. Positions mode only.
    std::vector<double> positions_at(double s) const {
        require_positions();
        require(s, s);
        const auto [k, w] = locate(s);
        if (w == 0.0) return nodes_[k].X;
        std::vector<double> out(n_ * d_);
        const auto& a = nodes_[k].X;
        const auto& b = nodes_[k + 1].X;
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = (1.0 - w) * a[j] + w * b[j];
        return out;
    }

    /// Trapezoid nodes of the window [lo, hi]: calls f(weight, snapshot) for
    /// every node, with end points interpolated linearly. Weights sum to hi - lo.
    template <class F>
    void for_each_node(double lo, double hi, F&& f) const {
        require_positions();
        require(lo, hi);
        if (hi - lo <= 1e-12 * spacing_) return;
        std::vector<std::pair<double, std::vector<double>>> ends;  // interpolated end points
        std::vector<std::pair<double, const std::vector<double>*>> pts;
        auto add_point = [&](double s) {
            const auto [k, w] = locate(s);
            if (w == 0.0) {
                pts.emplace_back(nodes_[k].t, &nodes_[k].X);
            } else {
                ends.emplace_back(s, positions_at(s));
                pts.emplace_back(s, nullptr);
            }
        };
        add_point(lo);
        const auto [klo, wlo] = locate(lo);
        const auto [khi, whi] = locate(hi);
        for (std::size_t k = klo + 1; k <= khi; ++k) {
            if (k == khi && whi == 0.0) break;
            pts.emplace_back(nodes_[k].t, &nodes_[k].X);
        }
        add_point(hi);
        std::size_t e = 0;
        for (auto& p : pts) {
            if (p.second == nullptr) p.second = &ends[e++].second;
        }
        (void)wlo;
        for (std::size_t m = 0; m < pts.size(); ++m) {
            double w = 0.0;
            if (m > 0) w += 0.5 * (pts[m].first - pts[m - 1].first);
            if (m + 1 < pts.size()) w += 0.5 * (pts[m + 1].first - pts[m].first);
            f(w, std::span<const double>(*pts[m].second));
        }
    }

  private:
    struct Node {
        double t = 0.0;
        Point mean;
        Point cumulative;
        std::vector<double> X;
    };

    void require(double lo, double hi) const {
        if (!covers(lo, hi)) {
            throw InternalError("HistoryBuffer: window [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                "] not covered");
        }
    }
    void require_positions() const {
        if (content_ != Content::positions) throw InternalError("HistoryBuffer: positions not stored");
    }

    /// Index k and weight w in [0,1) with s = (1-w) t_k + w t_{k+1}.
    std::pair<std::size_t, double> locate(double s) const {
        const double rel = (s - nodes_.front().t) / spacing_;
        if (rel <= 0.0) return {0, 0.0};
        const std::size_t last = nodes_.size() - 1;
        double kf = std::floor(rel);
        double w = rel - kf;
        if (w > 1.0 - 1e-9) {
            kf += 1.0;
            w = 0.0;
        } else if (w < 1e-9) {
            w = 0.0;
        }
        auto k = static_cast<std::size_t>(kf);
        if (k >= last) return {last, 0.0};
        return {k, w};
    }

    Point cumulative_at(double s) const {
        const auto [k, w] = locate(s);
        const Node& a = nodes_[k];
        if (w == 0.0) return a.cumulative;
        const Node& b = nodes_[k + 1];
        const double tau = w * spacing_;
        Point c(d_);
        for (std::size_t j = 0; j < d_; ++j)
            c[j] = a.cumulative[j] + tau * a.mean[j] + 0.5 * tau * w * (b.mean[j] - a.mean[j]);
        return c;
    }

    Content content_;
    std::size_t n_;
    std::size_t d_;
    double spacing_;
    std::size_t capacity_;
    std::deque<Node> nodes_;
};

/// Delay interaction for particles [first, last) at positions X (N x d) and time t.
///
/// Sources come from `sources` over the window [t - h, t]. With
/// `current_sources` non-empty and h == 0 the instantaneous interaction uses
/// those positions directly and the buffer is not read.
inline void delay_forces(const DriftModel& model, std::span<const double> X, const HistoryBuffer& sources, double t,
                         double h, std::span<const double> current_sources, std::span<double> out,
                         std::size_t first = 0, std::size_t last = static_cast<std::size_t>(-1)) {
    const auto d = static_cast<std::size_t>(model.dimension());
    const std::size_t n = X.size() / d;
    last = std::min(last, n);
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(first * d), out.begin() + static_cast<std::ptrdiff_t>(last * d),
              0.0);
    if (!model.has_interaction()) return;
    std::vector<double> tmp(d);

    if (model.interaction_affine()) {
        Point m;
        if (h == 0.0 && !current_sources.empty()) {
            m.assign(d, 0.0);
            const std::size_t ns = current_sources.size() / d;
            for (std::size_t j = 0; j < ns; ++j)
                for (std::size_t k = 0; k < d; ++k) m[k] += current_sources[j * d + k];
            for (double& v : m) v /= static_cast<double>(ns);
        } else {
            m = sources.window_mean(t - h, t);
        }
        for (std::size_t i = first; i < last; ++i) {
            model.eval_B_into(X.subspan(i * d, d), m, std::span<double>(out.data() + i * d, d));
        }
        return;
    }

    auto accumulate = [&](double weight, std::span<const double> snap) {
        const std::size_t ns = snap.size() / d;
        const double w = weight / static_cast<double>(ns);
        for (std::size_t i = first; i < last; ++i) {
            auto xi = X.subspan(i * d, d);
            for (std::size_t j = 0; j < ns; ++j) {
                model.eval_B_into(xi, snap.subspan(j * d, d), tmp);
                for (std::size_t k = 0; k < d; ++k) out[i * d + k] += w * tmp[k];
            }
        }
    };
    if (h == 0.0) {
        if (!current_sources.empty()) {
            accumulate(1.0, current_sources);
        } else {
            const auto snap = sources.positions_at(t);
            accumulate(1.0, snap);
        }
        return;
    }
    sources.for_each_node(t - h, t, accumulate);
    for (std::size_t j = first * d; j < last * d; ++j) out[j] /= h;
}

/// Delay force on particle i of `state` using its own history.
inline Point delay_force(std::size_t i, const EnsembleState& state, const HistoryBuffer& hist, const DriftModel& model) {
    if (i >= state.n) throw InvalidInput("delay_force: particle index out of range");
    const double h = cutoff_h(state.t, model.cutoff());
    std::vector<double> out(state.n * state.d);
    delay_forces(model, state.X, hist, state.t, h, state.X, out, i, i + 1);
    return Point(out.begin() + static_cast<std::ptrdiff_t>(i * state.d),
                 out.begin() + static_cast<std::ptrdiff_t>((i + 1) * state.d));
}

/// Standard normals for one step; entry i*d + k belongs to particle i, component k.
inline void draw_noise(const CounterNormal& gen, std::size_t step, std::span<double> out) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = gen.normal(step, j);
}

/// One Euler-Maruyama step of `state` in place, given the step's standard normals.
///
/// The interaction is read from `sources` (the ensemble's own history, or a
/// frozen history for Picard iterates). With `self_sources` the current
/// positions serve as sources at h(t) = 0. The new positions are appended to
/// `own_history` when it is non-null.
inline void step(const DriftModel& model, EnsembleState& state, const HistoryBuffer& sources, bool self_sources,
                 HistoryBuffer* own_history, double dt, std::span<const double> noise,
                 std::vector<double>& force_scratch) {
    const std::size_t n = state.n;
    const std::size_t d = state.d;
    if (noise.size() != n * d) throw InvalidInput("step: noise array has wrong shape");
    force_scratch.resize(n * d);
    const double h = cutoff_h(state.t, model.cutoff());
    delay_forces(model, state.X, sources, state.t, h, self_sources ? std::span<const double>(state.X) : std::span<const double>{},
                 force_scratch);

    const double gamma = model.gamma();
    const double kick = std::sqrt(2.0 * model.sigma() * dt);
    double a[16];
    std::vector<double> heap;
    double* ap = a;
    if (d > 16) {
        heap.resize(d);
        ap = heap.data();
    }
    double check = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double* x = state.X.data() + i * d;
        double* v = state.V.data() + i * d;
        model.eval_A_into(std::span<const double>(x, d), std::span<double>(ap, d));
        for (std::size_t k = 0; k < d; ++k) {
            const double acc = ap[k] + force_scratch[i * d + k] - gamma * v[k];
            x[k] += v[k] * dt;
            v[k] += acc * dt + kick * noise[i * d + k];
            check += x[k] + v[k];
        }
    }
    state.step += 1;
    state.t = static_cast<double>(state.step) * dt;
    if (!std::isfinite(check)) throw Divergence("non-finite particle state", state.step);
    if (own_history != nullptr) own_history->push(state.t, state.X);
}

/// Fills X and V (N x d) for a fresh ensemble.
using InitSampler = std::function<void(std::span<double> X, std::span<double> V, std::size_t n, std::size_t d)>;

/// Independent Gaussian positions and velocities; `x_shift` is added to every
/// position component. Deterministic in (seed, stream).
inline InitSampler gaussian_sampler(std::uint64_t seed, std::uint64_t stream, double x_std, double v_std,
                                    double x_shift = 0.0, double v_shift = 0.0) {
    return [=](std::span<double> X, std::span<double> V, std::size_t n, std::size_t d) {
        CounterNormal gen(seed, 1000 + stream);
        for (std::size_t j = 0; j < n * d; ++j) {
            X[j] = x_shift + x_std * gen.normal(0, j);
            V[j] = v_shift + v_std * gen.normal(1, j);
        }
    };
}

/// Copies a fixed ensemble.
inline InitSampler fixed_sampler(std::vector<double> X0, std::vector<double> V0) {
    return [X0 = std::move(X0), V0 = std::move(V0)](std::span<double> X, std::span<double> V, std::size_t n,
                                                     std::size_t d) {
        if (X0.size() != n * d || V0.size() != n * d) throw InvalidInput("fixed_sampler: shape mismatch");
        std::copy(X0.begin(), X0.end(), X.begin());
        std::copy(V0.begin(), V0.end(), V.begin());
    };
}

struct Snapshot {
    double t = 0.0;
    std::vector<double> X;
    std::vector<double> V;
};

using Functional = std::function<double(const EnsembleState&)>;

struct NamedFunctional {
    std::string name;
    Functional f;
};

/// Mean of |V|^2 over particles.
inline double velocity_second_moment(const EnsembleState& s) {
    double acc = 0.0;
    for (double v : s.V) acc += v * v;
    return acc / static_cast<double>(s.n);
}

/// Mean of |X|^2 over particles.
inline double position_second_moment(const EnsembleState& s) {
    double acc = 0.0;
    for (double x : s.X) acc += x * x;
    return acc / static_cast<double>(s.n);
}

struct RunResult {
    std::vector<Snapshot> snapshots;
    std::vector<DecayTrace> traces;
    EnsembleState final_state;
};

namespace detail {

inline EnsembleState make_state(const SimConfig& c, const DriftModel& m, const InitSampler& init) {
    EnsembleState s(c.n, static_cast<std::size_t>(m.dimension()), c.seed);
    init(s.X, s.V, s.n, s.d);
    s.validate();
    return s;
}

}  // namespace detail

/// Integrates one ensemble over [0, t_final], recording snapshots and the
/// given functionals at every `stride`-th step (step 0 included).
inline RunResult run(const SimConfig& config, const DriftModel& model, const InitSampler& init,
                     const std::vector<NamedFunctional>& functionals = {}) {
    config.validate();
    RunResult out;
    EnsembleState s = detail::make_state(config, model, init);
    HistoryBuffer hist = HistoryBuffer::for_model(model, config, s.n);
    hist.push(0.0, s.X);
    for (const auto& f : functionals) out.traces.emplace_back(f.name);
    auto record = [&] {
        if (config.keep_snapshots) out.snapshots.push_back({s.t, s.X, s.V});
        for (std::size_t k = 0; k < functionals.size(); ++k) out.traces[k].push(s.t, functionals[k].f(s));
    };
    record();
    const CounterNormal gen(config.seed);
    std::vector<double> noise(s.n * s.d), scratch;
    const std::size_t steps = config.steps();
    for (std::size_t k = 0; k < steps; ++k) {
        draw_noise(gen, k, noise);
        step(model, s, hist, true, &hist, config.dt, noise, scratch);
        if (s.step % config.stride == 0) record();
    }
    out.final_state = std::move(s);
    return out;
}

struct CoupledResult {
    DecayTrace J{"J"};
    std::vector<DecayTrace> batch_J;  ///< J restricted to contiguous index batches
    std::vector<std::pair<Snapshot, Snapshot>> snapshots;
    EnsembleState final_a;
    EnsembleState final_b;
};

/// Evolves two ensembles on identical noise (particle i of A and B see the
/// same increments) and records J_t = (1/N) sum_i Q(Z^A_i - Z^B_i).
inline CoupledResult run_coupled(const SimConfig& config, const DriftModel& model, const InitSampler& init_a,
                                 const InitSampler& init_b, const QuadraticForm& form, std::size_t batches = 10) {
    config.validate();
    CoupledResult out;
    EnsembleState a = detail::make_state(config, model, init_a);
    EnsembleState b = detail::make_state(config, model, init_b);
    if (a.n != b.n || a.d != b.d) throw InvalidInput("run_coupled: ensembles differ in size");
    HistoryBuffer ha = HistoryBuffer::for_model(model, config, a.n);
    HistoryBuffer hb = HistoryBuffer::for_model(model, config, b.n);
    ha.push(0.0, a.X);
    hb.push(0.0, b.X);
    const std::size_t n = a.n, d = a.d;
    batches = std::max<std::size_t>(1, std::min(batches, n));
    out.batch_J.assign(batches, DecayTrace("J_batch"));
    std::vector<double> per_batch(batches);

    auto record = [&] {
        std::fill(per_batch.begin(), per_batch.end(), 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double xx = 0.0, xv = 0.0, vv = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double x = a.X[i * d + k] - b.X[i * d + k];
                const double v = a.V[i * d + k] - b.V[i * d + k];
                xx += x * x;
                xv += x * v;
                vv += v * v;
            }
            const double q = form.a() * xx + 2.0 * xv + form.b() * vv;
            total += q;
            per_batch[i * batches / n] += q;
        }
        out.J.push(a.t, total / static_cast<double>(n));
        for (std::size_t k = 0; k < batches; ++k) {
            const std::size_t lo = (k * n + batches - 1) / batches;
            const std::size_t hi = ((k + 1) * n + batches - 1) / batches;
            out.batch_J[k].push(a.t, per_batch[k] / static_cast<double>(hi - lo));
        }
        if (config.keep_snapshots) out.snapshots.push_back({{a.t, a.X, a.V}, {b.t, b.X, b.V}});
    };
    record();
    const CounterNormal gen(config.seed);
    std::vector<double> noise(n * d), sa, sb;
    const std::size_t steps = config.steps();
    for (std::size_t k = 0; k < steps; ++k) {
        draw_noise(gen, k, noise);
        step(model, a, ha, true, &ha, config.dt, noise, sa);
        step(model, b, hb, true, &hb, config.dt, noise, sb);
        if (a.step % config.stride == 0) record();
    }
    out.final_a = std::move(a);
    out.final_b = std::move(b);
    return out;
}

}  // namespace dvfp

#endif
