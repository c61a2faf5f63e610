// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "dvfp/dvfp.hpp"

using namespace dvfp;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Uniform draws for the random parameter checks.
class Draws {
  public:
    explicit Draws(std::uint64_t seed) : rng_(seed, 77) {}
    double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(k_++, 0); }
    double normal() { return rng_.normal(k_++, 0); }

  private:
    CounterNormal rng_;
    std::uint64_t k_ = 0;
};

Outcome rate_formulas() {
    double worst = 0.0;
    for (double g : linspace(0.05, 10.0, 100)) {
        const double closed = g * (1.0 - std::sqrt(g * g / (4.0 + g * g)));
        worst = std::max(worst, std::abs(lambdas(g, 0.0).lambda1 - closed));
    }
    const double gstar = std::sqrt(2.0 * (std::sqrt(5.0) - 1.0));
    const double found = argmax_hypocoercive_rate();
    const bool ok = worst <= 1e-12 && std::abs(found - gstar) <= 1e-6;
    return {ok, fmt("max |lambda1 - closed form| = %.3g on 100 points; argmax %.10f vs %.10f", worst, found, gstar)};
}

Outcome halanay_rates() {
    Draws r(2);
    double worst_res = 0.0;
    bool in_range = true;
    double worst_h0 = 0.0, worst_hinf = 0.0;
    for (int i = 0; i < 50; ++i) {
        const double a = r.uniform(1e-3, 5.0);
        const double b = r.uniform(0.0, 1.0) * a;
        const double H = std::exp(r.uniform(std::log(1e-3), std::log(100.0)));
        const double l = halanay_rate(a, b, H);
        worst_res = std::max(worst_res, std::abs(-a + l + b * std::exp(l * H)));
        in_range = in_range && l > 0.0 && l <= a;
        worst_h0 = std::max(worst_h0, std::abs(halanay_rate(a, b, 1e-9) - (a - b)));
        if (b > 0.0) worst_hinf = std::max(worst_hinf, halanay_rate(a, b, 1e7));
    }
    const bool ok = worst_res <= 1e-10 && in_range && worst_h0 <= 1e-6 && worst_hinf <= 1e-6;
    return {ok, fmt("50 draws: max residual %.3g, lambda in (0, a]: %s, |lambda(H=1e-9) - (a-b)| <= %.3g, "
                    "lambda(H=1e7) <= %.3g",
                    worst_res, in_range ? "yes" : "no", worst_h0, worst_hinf)};
}

Outcome monotone_in_delay() {
    const std::vector<double> Hs = logspace(1e-3, 1e3, 200);
    double prev = overall_rate(1.0, 0.25, 0.0);
    const double at0 = prev;
    std::size_t increases = 0;
    for (double H : Hs) {
        const double l = overall_rate(1.0, 0.25, H);
        if (l > prev) ++increases;
        prev = l;
    }
    const Lambdas ls = lambdas(1.0, 0.25);
    const bool ok = increases == 0 && std::abs(at0 - 0.1875) <= 1e-12;
    return {ok, fmt("increases over 200 cut-offs: %zu; lambda(0) = %.15f (lambda1 %.15f, lambda2 %.15f)", increases,
                    at0, ls.lambda1, ls.lambda2)};
}

Outcome halanay_solver() {
    const double a = 2.0, b = 1.0, H = 1.0, T = 10.0;
    const double l = halanay_rate(a, b, H);
    const std::vector<double> dts = {1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4};
    std::vector<double> logdt, logerr;
    double finest = 0.0;
    for (double dt : dts) {
        const DecayTrace tr = halanay_compare_solve(a, b, H, 1.0, 0.0, T, dt, exponential_history(1.0, 0.0, l));
        double e = 0.0;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            const double exact = std::exp(-l * tr.time(k));
            e = std::max(e, std::abs(tr.value(k) - exact) / exact);
        }
        logdt.push_back(std::log(dt));
        logerr.push_back(std::log(e));
        finest = e;
    }
    const double order = fit_line(logdt, logerr).slope;
    // from a constant past the solution stays below the exponential bound
    const DecayTrace c = halanay_compare_solve(a, b, H, 1.0, 0.0, T, 1e-4);
    double excess = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k)
        excess = std::max(excess, c.value(k) / std::exp(-l * c.time(k)) - 1.0);
    const bool ok = finest <= 1e-4 && order >= 0.9 && excess <= 1e-9;
    return {ok, fmt("lambda %.10f; max rel error at dt=1e-4: %.3g; observed order %.2f; constant-history excess %.3g",
                    l, finest, order, excess)};
}

Outcome kummer_consistency() {
    bool ok = true;
    std::string detail;
    for (double l2 : {0.25, 0.5, 0.9}) {
        const KummerParams p{1.0, l2, 1.0, 0.0};
        const DecayTrace ode = integro_ode_solve(1.0, l2, 1.0, 0.0, 21.0, 1e-3, 10);
        double worst = 0.0;
        for (std::size_t k = 0; k < ode.size(); ++k) {
            const double t = ode.time(k);
            if (t < 1.0 - 1e-12) continue;
            worst = std::max(worst, std::abs(ode.value(k) / phi_infinite_delay(p, t) - 1.0));
        }
        DecayTrace closed("phi");
        for (double t = 50.0; t <= 500.0 * (1.0 + 1e-12); t *= 1.01) closed.push(t, phi_infinite_delay(p, t));
        const double slope = decay_exponent_fit(closed, 50.0, 500.0).slope;
        const DecayTrace long_ode = integro_ode_solve(1.0, l2, 1.0, 0.0, 500.0, 1e-2, 10);
        const double slope_ode = decay_exponent_fit(long_ode, 50.0, 500.0).slope;
        const double expect = l2 - 1.0;
        const bool here = worst <= 1e-6 && std::abs(slope - expect) <= 0.05 && std::abs(slope_ode - expect) <= 0.05;
        ok = ok && here;
        detail += fmt("[L2=%.2f rel diff %.2g, slope %.4f / ode %.4f vs %.4f] ", l2, worst, slope, slope_ode, expect);
    }
    return {ok, detail};
}

Outcome metric_oracle() {
    Draws r(6);
    std::size_t mismatches = 0, upper_fail = 0, equiv_fail = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(r.uniform(0.0, 6.0));
        const std::size_t dim = 4;
        PointCloud A(n, dim), B(n, dim);
        for (double& x : A.data) x = r.normal();
        const double shift = r.uniform(0.0, 2.0);
        for (double& x : B.data) x = r.normal() + shift;
        // brute force over all permutations, summed in index order
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = infinity;
        do {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += detail::squared_distance(A.row(i), B.row(perm[i]));
            best = std::min(best, total);
        } while (std::next_permutation(perm.begin(), perm.end()));
        const double w = dist2_exact(A, B);
        if (w != std::sqrt(best / static_cast<double>(n))) ++mismatches;
        const QuadraticForm f = QuadraticForm::contraction(r.uniform(0.2, 5.0));
        const double exact = distQ_exact(A, B, f).squared;
        if (distQ_coupled_upper(A, B, f).squared < exact * (1.0 - 1e-14)) ++upper_fail;
        const double w2 = w * w;
        if (exact < f.p() * w2 * (1.0 - 1e-12) || exact > f.q() * w2 * (1.0 + 1e-12)) ++equiv_fail;
    }
    const bool ok = mismatches == 0 && upper_fail == 0 && equiv_fail == 0;
    return {ok, fmt("200 pairs: exact mismatches %zu, coupled-upper failures %zu, p/q equivalence failures %zu",
                    mismatches, upper_fail, equiv_fail)};
}

ExperimentSpec linear_campaign(double H, double t_final, double dt, std::size_t stride) {
    ExperimentSpec s;
    s.experiment = "acceptance";
    s.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    s.model.dimension = 2;
    s.model.interaction = "quadratic";
    s.model.interaction_c = 0.125;  // eta = 2 c = 1/4
    s.gamma = 1.0;
    s.sigma = 1.0;
    s.H = H;
    s.n = 1000;
    s.dt = dt;
    s.t_final = t_final;
    s.stride = stride;
    return s;
}

struct ContractionRuns {
    std::vector<CampaignReport> reports;  // H = 0 and H = 1
};

ContractionRuns& contraction_runs() {
    static ContractionRuns runs = [] {
        ContractionRuns r;
        for (double H : {0.0, 1.0}) r.reports.push_back(campaign_decay(linear_campaign(H, 20.0, 1e-3, 10)));
        return r;
    }();
    return runs;
}

Outcome contraction() {
    bool ok = true;
    std::string detail;
    for (const CampaignReport& rep : contraction_runs().reports) {
        std::vector<double> fits;
        double worst_margin = infinity;
        for (const auto& row : rep.rows) {
            fits.push_back(row.lambda_fit);
            worst_margin = std::min(worst_margin, row.lambda_fit - row.lambda_predicted);
        }
        const std::size_t passes = rep.passes();
        ok = ok && passes >= 9;
        detail += fmt("[H=%g predicted %.5f, median fit %.4f, min fit - predicted %.4f, %zu/10 pass] ", rep.H,
                      rep.lambda_predicted, median(fits), worst_margin, passes);
    }
    return {ok, detail};
}

Outcome inequality_audit() {
    bool ok = true;
    std::string detail;
    const Lambdas ls = lambdas(1.0, 0.25);
    for (const CampaignReport& rep : contraction_runs().reports) {
        std::size_t checked = 0, violations = 0;
        double worst_fraction = 0.0;
        for (const auto& row : rep.rows) {
            const InequalityReport r = check_inequality(row.J, ls.lambda1, ls.lambda2, rep.H, row.batch_J);
            checked += r.checked;
            violations += r.violations;
            worst_fraction = std::max(worst_fraction, r.fraction());
        }
        ok = ok && worst_fraction <= 0.01;
        detail += fmt("[H=%g violations %zu of %zu steps, worst seed %.4f] ", rep.H, violations, checked,
                      worst_fraction);
    }
    return {ok, detail};
}

Outcome stationarity() {
    PotentialSpec s;
    s.dimension = 1;
    const PotentialInstance pot = make_potential(s);
    const StationaryResult res = fixed_point_rho(pot, 1.0, DensityGrid(1, 6.0, 240));
    double sup = 0.0;
    for (std::size_t c = 0; c < res.grid.size(); ++c) {
        const double x = res.grid.coord(c);
        sup = std::max(sup, std::abs(res.rho[c] - std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi)));
    }
    SimConfig c;
    c.dt = 0.002;
    c.t_final = 10.0;
    c.n = 20000;
    c.seed = 9;
    const StationarityReport rep = verify_stationarity(res, pot.drift(1.0, 1.0, 0.0), c);
    double worst = 0.0;
    std::string worst_name;
    for (const auto& m : rep.moments) {
        if (m.z() > worst) {
            worst = m.z();
            worst_name = m.name;
        }
    }
    const bool ok = sup <= 5e-4 && worst <= 3.0 && rep.velocity_variance_z <= 3.0;
    return {ok, fmt("grid sup error %.3g at delta 0.05; largest moment drift %.2f SE (%s); velocity variance %.2f SE "
                    "from sigma/gamma",
                    sup, worst, worst_name.c_str(), rep.velocity_variance_z)};
}

Outcome picard() {
    PotentialSpec s;
    s.dimension = 1;
    s.interaction = "quadratic";
    s.interaction_c = 0.1;
    const DriftModel model = make_potential(s).drift(1.0, 1.0, infinity);
    const std::size_t k_max = 6;
    std::vector<std::vector<double>> by_k(k_max);
    std::vector<double> stat, floor, same_noise;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        SimConfig c;
        c.dt = 1e-3;
        c.t_final = 1.0;
        c.n = 500;
        c.seed = seed;
        c.stride = 10;
        const auto init = gaussian_sampler(seed, 0, 1.0, 1.0);
        const PicardTrace p = picard_converge(c, model, init, k_max, 0.0);
        for (std::size_t k = 0; k < p.distances.size(); ++k) by_k[k].push_back(p.distances[k]);

        const RunResult direct = run(c, model, init);
        same_noise.push_back(coupled_sup_distance2(p.final_iterate, direct.snapshots, c.n));

        // independent direct runs with fresh noise and initial draws
        SimConfig c1 = c, c2 = c;
        c1.seed = seed + 1000;
        c2.seed = seed + 2000;
        const RunResult r1 = run(c1, model, gaussian_sampler(seed + 1000, 0, 1.0, 1.0));
        const RunResult r2 = run(c2, model, gaussian_sampler(seed + 2000, 0, 1.0, 1.0));
        const Snapshot& fin = p.final_iterate.back();
        const PointCloud pc = phase_cloud(fin.X, fin.V, 1);
        const PointCloud a = phase_cloud(r1.final_state.X, r1.final_state.V, 1);
        const PointCloud b = phase_cloud(r2.final_state.X, r2.final_state.V, 1);
        stat.push_back(dist2_exact(pc, a));
        floor.push_back(dist2_exact(a, b));
    }
    std::vector<double> med;
    for (const auto& v : by_k) med.push_back(median(v));
    bool decreasing = true;
    for (std::size_t k = 1; k < 5; ++k) decreasing = decreasing && med[k] < med[k - 1];
    const double ratio = median(stat) / median(floor);
    const double coupled = *std::max_element(same_noise.begin(), same_noise.end());
    const bool ok = decreasing && ratio <= 1.25 && coupled <= 1e-3 * med[0];
    return {ok, fmt("median E_k for k=1..6: %.3g %.3g %.3g %.3g %.3g %.3g; dist2 to independent run / two-run floor "
                    "= %.3f / %.3f (ratio %.3f); same-noise sup distance^2 %.3g",
                    med[0], med[1], med[2], med[3], med[4], med[5], median(stat), median(floor), ratio, coupled)};
}

Outcome infinite_delay() {
    const CampaignReport rep = campaign_decay(linear_campaign(infinity, 200.0, 1e-2, 10));
    std::size_t power_better = 0;
    std::vector<double> slopes, r2e, r2p;
    for (const auto& row : rep.rows) {
        if (row.r2_power > row.r2_exponential) ++power_better;
        slopes.push_back(row.power_slope);
        r2e.push_back(row.r2_exponential);
        r2p.push_back(row.r2_power);
    }
    const Lambdas ls = lambdas(1.0, 0.25);
    const bool ok = power_better >= 8;
    return {ok, fmt("power law fits better in %zu/10 seeds; median R2 exponential %.4f, power %.4f; median log-log "
                    "slope %.3f (comparison solution exponent %.3f)",
                    power_better, median(r2e), median(r2p), median(slopes), ls.lambda2 / ls.lambda1 - 1.0)};
}

}  // namespace

int main() {
    const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
        {1, rate_formulas},      {2, halanay_rates},    {3, monotone_in_delay}, {4, halanay_solver},
        {5, kummer_consistency}, {6, metric_oracle},    {7, contraction},       {8, inequality_audit},
        {9, stationarity},       {10, picard},          {11, infinite_delay},
    };
    int failures = 0;
    for (const auto& [id, fn] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
