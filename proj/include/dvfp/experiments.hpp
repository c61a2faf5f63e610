#ifndef DVFP_EXPERIMENTS_HPP
#define DVFP_EXPERIMENTS_HPP

// Figure data and simulation campaigns, returned as CSV tables.

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "dvfp/config.hpp"
#include "dvfp/csv.hpp"
#include "dvfp/kummer.hpp"
#include "dvfp/metrics.hpp"
#include "dvfp/rates.hpp"
#include "dvfp/simulator.hpp"
#include "dvfp/trace.hpp"

namespace dvfp {

/// `gamma,eta_bar` over the grid.
inline Table figure_validity(const std::vector<double>& gammas) {
    Table t;
    t.meta = {{"figure", "validity"}, {"points", std::to_string(gammas.size())}};
    t.header = {"gamma", "eta_bar"};
    for (double g : gammas) t.add_row({format_number(g), format_number(eta_bar(g))});
    return t;
}

/// `gamma,lambda,is_max`; is_max marks the grid row with the largest rate.
/// The continuous maximizer goes into the metadata.
inline Table figure_hypocoercive(const std::vector<double>& gammas) {
    Table t;
    t.meta = {{"figure", "hypocoercive"},
              {"points", std::to_string(gammas.size())},
              {"gamma_star", format_number(argmax_hypocoercive_rate())}};
    t.header = {"gamma", "lambda", "is_max"};
    std::size_t best = 0;
    std::vector<double> lam;
    for (std::size_t k = 0; k < gammas.size(); ++k) {
        lam.push_back(hypocoercive_rate(gammas[k]));
        if (lam[k] > lam[best]) best = k;
    }
    for (std::size_t k = 0; k < gammas.size(); ++k)
        t.add_row({format_number(gammas[k]), format_number(lam[k]), k == best ? "1" : "0"});
    return t;
}

/// The two interaction strengths used for the rate families.
struct EtaRule {
    std::string name;
    double (*eta)(double gamma);
};

inline const std::vector<EtaRule>& eta_rules() {
    static const std::vector<EtaRule> rules = {
        {"2g/(3+3g)", [](double g) { return 2.0 * g / (3.0 + 3.0 * g); }},
        {"g/(2+2g)", [](double g) { return g / (2.0 + 2.0 * g); }},
    };
    return rules;
}

/// Combined rate, or NaN where lambda1 <= lambda2.
inline double rate_or_nan(double gamma, double eta, double H) {
    try {
        return overall_rate(gamma, eta, H);
    } catch (const NoPositiveRate&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

/// `gamma,eta_rule,H,lambda` for both rules and every H.
inline Table figure_rate_families(const std::vector<double>& gammas, const std::vector<double>& Hs) {
    Table t;
    t.meta = {{"figure", "families"}, {"gamma_points", std::to_string(gammas.size())}, {"H", format_grid(Hs)}};
    t.header = {"gamma", "eta_rule", "H", "lambda"};
    for (const auto& rule : eta_rules())
        for (double H : Hs)
            for (double g : gammas)
                t.add_row({format_number(g), rule.name, format_number(H), format_number(rate_or_nan(g, rule.eta(g), H))});
    return t;
}

/// Rate against the cut-off at gamma = 1, eta = gamma / (2 + 2 gamma).
inline Table figure_delay(const std::vector<double>& Hs) {
    Table t;
    const double g = 1.0;
    const EtaRule& rule = eta_rules()[1];
    t.meta = {{"figure", "delay"}, {"gamma", "1"}, {"eta", format_number(rule.eta(g))}};
    t.header = {"gamma", "eta_rule", "H", "lambda"};
    for (double H : Hs) t.add_row({format_number(g), rule.name, format_number(H), format_number(rate_or_nan(g, rule.eta(g), H))});
    return t;
}

/// `gamma,eta,H,lambda1,lambda2,lambda,valid` at fixed eta and H.
inline Table rates_sweep(const std::vector<double>& gammas, double eta, double H) {
    Table t;
    t.meta = {{"eta", format_number(eta)}, {"H", format_number(H)}};
    t.header = {"gamma", "eta", "H", "lambda1", "lambda2", "lambda", "valid"};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double g : gammas) {
        double l1 = nan, l2 = nan, l = nan;
        bool valid = RateParameters::with_optimal_b(g, eta, H).validity().all();
        try {
            const Lambdas ls = lambdas(g, eta);
            l1 = ls.lambda1;
            l2 = ls.lambda2;
            l = halanay_rate(l1, l2, H);
        } catch (const OutOfValidity&) {
            valid = false;
        } catch (const NoPositiveRate&) {
            valid = false;
        }
        t.add_row({format_number(g), format_number(eta), format_number(H), format_number(l1), format_number(l2),
                   format_number(l), valid ? "1" : "0"});
    }
    return t;
}

struct CampaignRow {
    std::uint64_t seed = 0;
    double lambda_fit = 0.0;
    double fit_se = 0.0;
    double lambda_predicted = 0.0;
    bool pass = false;
    bool skipped = false;  ///< J vanished identically, nothing to fit
    double r2_exponential = 0.0;
    double r2_power = 0.0;
    double power_slope = 0.0;
    std::size_t fit_points = 0;
    DecayTrace J;
    std::vector<DecayTrace> batch_J;
};

struct CampaignReport {
    double gamma = 0.0;      ///< in the time units with alpha = 1
    double eta = 0.0;
    double H = 0.0;
    double lambda_predicted = 0.0;  ///< in the original time units; 0 for H = inf
    std::vector<CampaignRow> rows;

    std::size_t passes() const {
        return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.pass; }));
    }
    Table table(const ExperimentSpec& spec) const;
};

/// Fit window and floor used by the campaign.
struct FitWindow {
    double t_lo = 0.0;
    double t_hi = 0.0;
    double floor = 0.0;
};

/// Drops the first `discard` fraction of the horizon. The floor is 1e3 times
/// the round-off level of J, 16 eps^2 q (J_0 + 1).
inline FitWindow campaign_window(const DecayTrace& J, double discard, double q) {
    const double eps = std::numeric_limits<double>::epsilon();
    const double T = J.times().back();
    return {discard * T, T, 1e3 * 16.0 * eps * eps * q * (J.value(0) + 1.0)};
}

/// Coupled runs per seed on identical noise, with an exponential and a
/// power-law fit to J. For finite H a seed passes when
/// lambda_fit >= lambda_predicted - tol_fit_se * SE; for H = inf it passes
/// when the power law fits better than the exponential.
inline CampaignReport campaign_decay(const ExperimentSpec& spec) {
    spec.validate();
    const DriftModel model = spec.drift_model();
    const DriftModel unit = model.rescale_time();
    const double time_scale = std::sqrt(model.alpha());

    CampaignReport rep;
    rep.gamma = unit.gamma();
    rep.eta = unit.eta();
    rep.H = model.cutoff();
    const auto v = RateParameters::with_optimal_b(unit.gamma(), unit.eta(), unit.cutoff()).validity();
    if (!v.eta_below_ratio) {
        throw OutOfValidity("campaign: eta = " + format_number(unit.eta()) + " violates eta < gamma/(1+gamma)");
    }
    const Lambdas ls = lambdas(unit.gamma(), unit.eta());
    if (!(ls.lambda1 > ls.lambda2)) throw OutOfValidity("campaign: lambda1 <= lambda2, no rate to compare against");
    rep.lambda_predicted = halanay_rate(ls.lambda1, ls.lambda2, unit.cutoff()) * time_scale;

    const QuadraticForm form = QuadraticForm::contraction(unit.gamma());
    const bool infinite = std::isinf(model.cutoff());

    auto one_seed = [&](std::uint64_t seed) {
        SimConfig c = spec.sim_config();
        c.seed = seed;
        c.keep_snapshots = false;
        const auto init_a = gaussian_sampler(seed, 0, spec.init_x_std, spec.init_v_std);
        const auto init_b = gaussian_sampler(seed, 1, spec.init_x_std, spec.init_v_std, spec.init_x_shift);
        CoupledResult res = run_coupled(c, model, init_a, init_b, form, spec.batches);
        CampaignRow row;
        row.seed = seed;
        row.lambda_predicted = rep.lambda_predicted;
        row.J = std::move(res.J);
        row.batch_J = std::move(res.batch_J);
        const auto& vals = row.J.values();
        if (std::all_of(vals.begin(), vals.end(), [](double x) { return x == 0.0; })) {
            row.skipped = true;
            row.pass = true;
            return row;
        }
        const FitWindow w = campaign_window(row.J, spec.tol_fit_discard, form.q());
        const RateFit ef = fit_exponential_rate(row.J, w.t_lo, w.t_hi, w.floor);
        row.lambda_fit = ef.rate;
        row.fit_se = ef.rate_se;
        row.r2_exponential = ef.r2;
        row.fit_points = ef.points;
        const LineFit pf = fit_power_law(row.J, std::max(w.t_lo, c.dt), w.t_hi);
        row.r2_power = pf.r2;
        row.power_slope = pf.slope;
        row.pass = infinite ? row.r2_power > row.r2_exponential
                            : row.lambda_fit >= rep.lambda_predicted - spec.tol_fit_se * row.fit_se;
        return row;
    };

    // Seeds run concurrently; results are collected in seed order.
    const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<CampaignRow>> pending;
    for (std::size_t k = 0; k < spec.seeds.size(); ++k) {
        if (pending.size() >= workers) {
            rep.rows.push_back(pending.front().get());
            pending.erase(pending.begin());
        }
        pending.push_back(std::async(std::launch::async, one_seed, spec.seeds[k]));
    }
    for (auto& f : pending) rep.rows.push_back(f.get());
    return rep;
}

inline Table CampaignReport::table(const ExperimentSpec& spec) const {
    Table t;
    t.meta = config_metadata(spec);
    t.meta.emplace_back("lambda_predicted", format_number(lambda_predicted));
    t.header = {"seed", "lambda_fit", "lambda_predicted", "pass", "fit_se", "r2_exponential", "r2_power", "power_slope"};
    for (const auto& r : rows) {
        t.add_row({std::to_string(r.seed), format_number(r.lambda_fit), format_number(r.lambda_predicted),
                   r.pass ? "1" : "0", format_number(r.fit_se), format_number(r.r2_exponential),
                   format_number(r.r2_power), format_number(r.power_slope)});
    }
    return t;
}

/// Trace as a `t,<name>` table.
inline Table trace_table(const DecayTrace& tr, const Metadata& meta = {}) {
    Table t;
    t.meta = meta;
    t.header = {"t", tr.name().empty() ? "value" : tr.name()};
    for (std::size_t k = 0; k < tr.size(); ++k) t.add_row({format_number(tr.time(k)), format_number(tr.value(k))});
    return t;
}

/// Snapshots as `t,particle,x1..xd,v1..vd`.
inline Table snapshot_table(const std::vector<Snapshot>& snaps, std::size_t d, const Metadata& meta = {}) {
    Table t;
    t.meta = meta;
    t.header = {"t", "particle"};
    for (std::size_t k = 1; k <= d; ++k) t.header.push_back("x" + std::to_string(k));
    for (std::size_t k = 1; k <= d; ++k) t.header.push_back("v" + std::to_string(k));
    for (const auto& s : snaps) {
        const std::size_t n = s.X.size() / d;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::string> row = {format_number(s.t), std::to_string(i)};
            for (std::size_t k = 0; k < d; ++k) row.push_back(format_number(s.X[i * d + k]));
            for (std::size_t k = 0; k < d; ++k) row.push_back(format_number(s.V[i * d + k]));
            t.add_row(std::move(row));
        }
    }
    return t;
}

/// Phase-space cloud from a snapshot table: the rows at time `t` (the last
/// time when t is NaN), columns x1..xd, v1..vd.
inline PointCloud cloud_from_table(const Table& t, double time = std::numeric_limits<double>::quiet_NaN()) {
    std::vector<std::size_t> xs, vs;
    for (std::size_t k = 0; k < t.header.size(); ++k) {
        const std::string& h = t.header[k];
        if (h.size() > 1 && h[0] == 'x') xs.push_back(k);
        if (h.size() > 1 && h[0] == 'v') vs.push_back(k);
    }
    if (xs.empty() || xs.size() != vs.size()) throw InvalidInput("snapshot table needs columns x1..xd and v1..vd");
    const std::size_t tc = t.column_index("t");
    if (t.rows.empty()) throw InvalidInput("snapshot table is empty");
    if (std::isnan(time)) time = parse_number(t.rows.back()[tc]);
    const std::size_t d = xs.size();
    PointCloud c;
    c.dim = 2 * d;
    for (const auto& r : t.rows) {
        if (parse_number(r[tc]) != time) continue;
        for (std::size_t k = 0; k < d; ++k) c.data.push_back(parse_number(r[xs[k]]));
        for (std::size_t k = 0; k < d; ++k) c.data.push_back(parse_number(r[vs[k]]));
        ++c.n;
    }
    if (c.n == 0) throw InvalidInput("no snapshot rows at the requested time");
    return c;
}

}  // namespace dvfp

#endif
