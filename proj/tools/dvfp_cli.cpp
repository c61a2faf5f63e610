// Command-line front end: figure data, rate queries, simulations and campaigns.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dvfp/dvfp.hpp"

namespace fs = std::filesystem;
using namespace dvfp;

namespace {

struct Globals {
    std::string config;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string output;  // explicit output file, overrides out_dir/<experiment>_<name>.csv
};

ExperimentSpec load_spec(const Globals& g) {
    ExperimentSpec s = g.config.empty() ? ExperimentSpec{} : load_config(g.config);
    if (!g.out_dir.empty()) s.out_dir = g.out_dir;
    if (g.seed) s.seed = *g.seed;
    s.validate();
    return s;
}

std::string output_path(const Globals& g, const ExperimentSpec& s, const std::string& name) {
    fs::path p = g.output.empty() ? fs::path(s.out_dir) / (s.experiment + "_" + name + ".csv") : fs::path(g.output);
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    if (ec) throw InvalidInput("cannot create output directory '" + p.parent_path().string() + "': " + ec.message());
    return p.string();
}

void emit(const Globals& g, const ExperimentSpec& s, const std::string& name, Table t) {
    // every file carries the full parameter set
    Metadata meta = config_metadata(s);
    for (auto& kv : t.meta) meta.push_back(std::move(kv));
    t.meta = std::move(meta);
    const std::string path = output_path(g, s, name);
    write_table(path, t);
    std::cout << path << '\n';
}

void print_kv(const std::string& k, double v) { std::cout << k << '=' << format_number(v) << '\n'; }

std::pair<double, double> parse_pair(const std::string& text, const char* what) {
    const std::vector<double> v = parse_grid(text);
    if (v.size() != 2) throw InvalidInput(std::string(what) + " expects two comma-separated numbers");
    return {v[0], v[1]};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delay Vlasov-Fokker-Planck toolkit"};
    app.require_subcommand(1);
    Globals g;
    std::string seed_text;
    app.add_option("--config", g.config, "experiment config file")->check(CLI::ExistingFile);
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--seed", seed_text, "base seed (overrides the config)");
    app.add_option("-o,--output", g.output, "output CSV path");

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate one ensemble, or two coupled ones");
    bool coupled = false, snapshots = false;
    sim->add_flag("--coupled", coupled, "run two ensembles on shared noise and record J");
    sim->add_flag("--snapshots", snapshots, "write particle snapshots instead of moment traces");

    // rates
    auto* rates = app.add_subcommand("rates", "decay rates");
    rates->require_subcommand(1);
    auto* rl = rates->add_subcommand("lambda", "rates for one parameter set");
    double r_gamma = 1.0, r_eta = 0.0, r_H = 0.0;
    std::optional<double> r_b;
    rl->add_option("--gamma", r_gamma)->required();
    rl->add_option("--eta", r_eta)->required();
    rl->add_option("--H", r_H, "cut-off, inf allowed");
    rl->add_option("--b", r_b, "form coefficient for the general derivation (default 2/gamma)");
    auto* rs = rates->add_subcommand("sweep", "rates over the config's gamma grid at its eta and H");

    // metrics
    auto* met = app.add_subcommand("metrics", "distances between snapshot files");
    met->require_subcommand(1);
    auto* mc = met->add_subcommand("compare", "exact dist_2 and dist_Q between two snapshot CSVs");
    std::string m_a, m_b, m_form;
    double m_time = std::nan("");
    mc->add_option("--a", m_a)->required()->check(CLI::ExistingFile);
    mc->add_option("--b", m_b)->required()->check(CLI::ExistingFile);
    mc->add_option("--form", m_form, "a,b coefficients of Q (default the contraction form at the config's gamma)");
    mc->add_option("--time", m_time, "snapshot time (default the last one)");

    // kummer
    auto* kum = app.add_subcommand("kummer", "infinite-delay comparison solution");
    kum->require_subcommand(1);
    double k_l1 = 1.0, k_l2 = 0.5, k_y0 = 1.0, k_T = 100.0, k_dt = 1e-2, k_lo = 50.0, k_hi = 500.0;
    std::size_t k_every = 10;
    auto* kt = kum->add_subcommand("trace", "closed form against the integro-ODE");
    auto* ke = kum->add_subcommand("exponent", "log-log slope of the closed form");
    for (auto* c : {kt, ke}) {
        c->add_option("--lambda1", k_l1);
        c->add_option("--lambda2", k_l2);
        c->add_option("--y0", k_y0);
    }
    kt->add_option("--T", k_T);
    kt->add_option("--dt", k_dt);
    kt->add_option("--every", k_every, "record every n-th step");
    ke->add_option("--t-lo", k_lo);
    ke->add_option("--t-hi", k_hi);

    // stationary
    auto* sta = app.add_subcommand("stationary", "stationary density");
    sta->require_subcommand(1);
    auto* ss = sta->add_subcommand("solve", "fixed point of the Gibbs map for the config's model");
    std::string s_grid = "6,240";
    std::optional<double> s_theta2;
    std::size_t s_verify_n = 0;
    ss->add_option("--grid", s_grid, "L,M: box [-L, L]^d with M cells per axis");
    ss->add_option("--theta2", s_theta2, "velocity temperature (default model.sigma / model.gamma)");
    ss->add_option("--verify", s_verify_n, "also simulate N particles from the density over t_final");

    // verify
    auto* ver = app.add_subcommand("verify", "numerical cross-checks");
    ver->require_subcommand(1);
    auto* vh = ver->add_subcommand("halanay", "delay comparison equation against exp(-lambda t)");
    double h_a = 2.0, h_b = 1.0, h_H = 1.0, h_T = 10.0, h_dt = 1e-3;
    std::string h_history = "exponential";
    vh->add_option("--a", h_a);
    vh->add_option("--b", h_b);
    vh->add_option("--H", h_H);
    vh->add_option("--T", h_T);
    vh->add_option("--dt", h_dt);
    vh->add_option("--history", h_history)->check(CLI::IsMember({"exponential", "constant"}));
    auto* vp = ver->add_subcommand("picard", "Picard iteration distances for the config's model");
    std::size_t p_kmax = 6;
    vp->add_option("--k-max", p_kmax);
    auto* vi = ver->add_subcommand("inequality", "differential inequality along a coupled run");
    bool i_sup = false;
    vi->add_flag("--sup", i_sup, "compare against the window supremum instead of the average");

    // figures
    auto* fig = app.add_subcommand("figures", "figure data as CSV");
    std::string which;
    fig->add_option("which", which)->required()->check(CLI::IsMember({"validity", "hypo", "families", "delay"}));

    // campaign
    auto* camp = app.add_subcommand("campaign", "coupled decay campaign over the config's seeds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        if (!seed_text.empty()) {
            const double v = parse_number(seed_text);
            if (!(v >= 0.0) || v != std::floor(v)) throw InvalidInput("--seed must be a nonnegative integer");
            g.seed = static_cast<std::uint64_t>(v);
        }
        const ExperimentSpec spec = load_spec(g);

        if (*sim) {
            const DriftModel model = spec.drift_model();
            const SimConfig c = spec.sim_config();
            const auto d = static_cast<std::size_t>(model.dimension());
            const auto init_a = gaussian_sampler(spec.seed, 0, spec.init_x_std, spec.init_v_std);
            if (coupled) {
                const auto init_b =
                    gaussian_sampler(spec.seed, 1, spec.init_x_std, spec.init_v_std, spec.init_x_shift);
                SimConfig cc = c;
                cc.keep_snapshots = false;
                const CoupledResult r = run_coupled(cc, model, init_a, init_b,
                                                    QuadraticForm::contraction(model.rescale_time().gamma()),
                                                    spec.batches);
                Table t;
                t.header = {"t", "J"};
                for (std::size_t k = 0; k < r.batch_J.size(); ++k) t.header.push_back("J_batch" + std::to_string(k));
                for (std::size_t i = 0; i < r.J.size(); ++i) {
                    std::vector<std::string> row = {format_number(r.J.time(i)), format_number(r.J.value(i))};
                    for (const auto& b : r.batch_J) row.push_back(format_number(b.value(i)));
                    t.add_row(std::move(row));
                }
                emit(g, spec, "coupled", std::move(t));
            } else if (snapshots) {
                const RunResult r = run(c, model, init_a);
                emit(g, spec, "snapshots", snapshot_table(r.snapshots, d));
            } else {
                SimConfig cc = c;
                cc.keep_snapshots = false;
                const RunResult r = run(cc, model, init_a,
                                        {{"v2", velocity_second_moment}, {"x2", position_second_moment}});
                Table t;
                t.header = {"t", "v2", "x2"};
                for (std::size_t i = 0; i < r.traces[0].size(); ++i)
                    t.add_row({format_number(r.traces[0].time(i)), format_number(r.traces[0].value(i)),
                               format_number(r.traces[1].value(i))});
                emit(g, spec, "moments", std::move(t));
            }
        } else if (*rl) {
            const RateParameters p{r_gamma, r_eta, r_H, r_b.value_or(optimal_b(r_gamma))};
            const auto f = p.validity();
            std::cout << "eta_admits_b=" << f.eta_admits_b << "\nb_above_lower=" << f.b_above_lower
                      << "\nb_below_upper=" << f.b_below_upper << "\neta_below_ratio=" << f.eta_below_ratio
                      << "\neta_below_bar=" << f.eta_below_bar << '\n';
            print_kv("eta_bar", eta_bar(r_gamma));
            if (r_b) {
                const RateDerivation d = derivation_constants(*r_b, r_gamma, r_eta);
                print_kv("lambda1", d.lambda1_general);
                print_kv("lambda2", d.lambda2_general);
                print_kv("epsilon", d.epsilon);
                print_kv("lambda", halanay_rate(d.lambda1_general, d.lambda2_general, r_H));
            } else {
                const Lambdas l = lambdas(r_gamma, r_eta);
                print_kv("lambda1", l.lambda1);
                print_kv("lambda2", l.lambda2);
                print_kv("lambda", halanay_rate(l.lambda1, l.lambda2, r_H));
            }
        } else if (*rs) {
            emit(g, spec, "rates", rates_sweep(spec.gamma_grid, spec.eta, spec.H));
        } else if (*mc) {
            const PointCloud A = cloud_from_table(read_table(m_a), m_time);
            const PointCloud B = cloud_from_table(read_table(m_b), m_time);
            QuadraticForm form = QuadraticForm::contraction(spec.gamma);
            if (!m_form.empty()) {
                const auto [a, b] = parse_pair(m_form, "--form");
                form = QuadraticForm(a, b);
            }
            print_kv("n", static_cast<double>(A.n));
            print_kv("dist2", dist2_exact(A, B));
            print_kv("distQ", distQ_exact(A, B, form).value());
            print_kv("distQ_coupled_upper", distQ_coupled_upper(A, B, form).value());
            print_kv("p", form.p());
            print_kv("q", form.q());
        } else if (*kt) {
            const KummerParams p{k_l1, k_l2, k_y0, 0.0};
            const DecayTrace ode = integro_ode_solve(k_l1, k_l2, k_y0, 0.0, k_T, k_dt, k_every);
            Table t;
            t.meta = {{"lambda1", format_number(k_l1)}, {"lambda2", format_number(k_l2)}, {"y0", format_number(k_y0)}};
            t.header = {"t", "phi", "phi_ode", "rel_diff"};
            for (std::size_t i = 0; i < ode.size(); ++i) {
                const double exact = phi_infinite_delay(p, ode.time(i));
                t.add_row({format_number(ode.time(i)), format_number(exact), format_number(ode.value(i)),
                           format_number(std::abs(ode.value(i) - exact) / exact)});
            }
            emit(g, spec, "kummer", std::move(t));
        } else if (*ke) {
            const KummerParams p{k_l1, k_l2, k_y0, 0.0};
            DecayTrace tr("phi");
            for (double t = k_lo; t <= k_hi * (1.0 + 1e-12); t *= 1.01) tr.push(t, phi_infinite_delay(p, t));
            const LineFit f = decay_exponent_fit(tr, k_lo, k_hi);
            print_kv("slope", f.slope);
            print_kv("slope_se", f.slope_se);
            print_kv("expected", p.Lambda() - 1.0);
        } else if (*ss) {
            const auto [L, M] = parse_pair(s_grid, "--grid");
            if (M != std::floor(M)) throw InvalidInput("--grid: cell count must be an integer");
            const PotentialInstance pot = make_potential(spec.model);
            const double theta2 = s_theta2.value_or(spec.sigma / spec.gamma);
            const DensityGrid grid(pot.dimension, L, static_cast<std::size_t>(M));
            const StationaryResult res = fixed_point_rho(pot, theta2, grid);
            Table t;
            t.meta = {{"theta2", format_number(theta2)},
                      {"iterations", std::to_string(res.iterations)},
                      {"residual", format_number(res.residual)},
                      {"boundary_mass", format_number(res.boundary_mass)},
                      {"free_energy", format_number(free_energy(pot, theta2, grid, res.rho))}};
            t.header = grid.dim() == 1 ? std::vector<std::string>{"x", "rho"}
                                       : std::vector<std::string>{"x1", "x2", "rho"};
            for (std::size_t c = 0; c < grid.size(); ++c) {
                std::vector<std::string> row;
                for (double x : grid.point(c)) row.push_back(format_number(x));
                row.push_back(format_number(res.rho[c]));
                t.add_row(std::move(row));
            }
            emit(g, spec, "stationary", std::move(t));
            if (s_verify_n > 0) {
                SimConfig c = spec.sim_config();
                c.n = s_verify_n;
                const StationarityReport rep = verify_stationarity(res, spec.drift_model(), c);
                for (const auto& m : rep.moments) print_kv("z_" + m.name, m.z());
                print_kv("velocity_variance_z", rep.velocity_variance_z);
            }
        } else if (*vh) {
            const double l = halanay_rate(h_a, h_b, h_H);
            const ScalarHistory hist = h_history == "constant" ? constant_history(1.0) : exponential_history(1.0, 0.0, l);
            const DecayTrace tr = halanay_compare_solve(h_a, h_b, h_H, 1.0, 0.0, h_T, h_dt, hist);
            double worst = 0.0;
            Table t;
            t.meta = {{"a", format_number(h_a)}, {"b", format_number(h_b)}, {"H", format_number(h_H)},
                      {"lambda", format_number(l)}, {"history", h_history}};
            t.header = {"t", "y", "exp_bound"};
            for (std::size_t i = 0; i < tr.size(); ++i) {
                const double e = std::exp(-l * tr.time(i));
                worst = std::max(worst, std::abs(tr.value(i) - e) / e);
                t.add_row({format_number(tr.time(i)), format_number(tr.value(i)), format_number(e)});
            }
            emit(g, spec, "halanay", std::move(t));
            print_kv("lambda", l);
            print_kv("max_rel_diff", worst);
        } else if (*vp) {
            const PicardTrace p =
                picard_converge(spec.sim_config(), spec.drift_model(),
                                gaussian_sampler(spec.seed, 0, spec.init_x_std, spec.init_v_std), p_kmax, 0.0);
            Table t;
            t.header = {"k", "distance2"};
            for (std::size_t k = 0; k < p.distances.size(); ++k)
                t.add_row({std::to_string(k + 1), format_number(p.distances[k])});
            emit(g, spec, "picard", std::move(t));
        } else if (*vi) {
            const DriftModel model = spec.drift_model();
            const DriftModel unit = model.rescale_time();
            if (model.alpha() != 1.0) throw InvalidInput("verify inequality: needs model.alpha = 1");
            const Lambdas ls = lambdas(unit.gamma(), unit.eta());
            SimConfig c = spec.sim_config();
            c.keep_snapshots = false;
            const CoupledResult r =
                run_coupled(c, model, gaussian_sampler(spec.seed, 0, spec.init_x_std, spec.init_v_std),
                            gaussian_sampler(spec.seed, 1, spec.init_x_std, spec.init_v_std, spec.init_x_shift),
                            QuadraticForm::contraction(unit.gamma()), spec.batches);
            InequalityOptions opt;
            opt.sup_form = i_sup;
            opt.se_multiplier = spec.tol_slack_se;
            const InequalityReport rep = check_inequality(r.J, ls.lambda1, ls.lambda2, model.cutoff(), r.batch_J, opt);
            print_kv("checked", static_cast<double>(rep.checked));
            print_kv("violations", static_cast<double>(rep.violations));
            print_kv("fraction", rep.fraction());
            print_kv("max_excess", rep.max_excess);
        } else if (*fig) {
            if (which == "validity") emit(g, spec, "validity", figure_validity(spec.gamma_grid));
            if (which == "hypo") emit(g, spec, "hypo", figure_hypocoercive(spec.gamma_grid));
            if (which == "families") emit(g, spec, "families", figure_rate_families(spec.gamma_grid, spec.H_list));
            if (which == "delay") emit(g, spec, "delay", figure_delay(spec.H_list));
        } else if (*camp) {
            const CampaignReport rep = campaign_decay(spec);
            Table t = rep.table(spec);
            t.meta.clear();  // emit adds the config
            t.meta.emplace_back("lambda_predicted", format_number(rep.lambda_predicted));
            emit(g, spec, "campaign", std::move(t));
            std::cerr << rep.passes() << "/" << rep.rows.size() << " seeds pass\n";
        }
        return static_cast<int>(ExitCode::ok);
    } catch (const OutOfValidity& e) {
        std::cerr << "validity: " << e.what() << '\n';
        return static_cast<int>(ExitCode::validity);
    } catch (const NoPositiveRate& e) {
        std::cerr << "validity: " << e.what() << '\n';
        return static_cast<int>(ExitCode::validity);
    } catch (const Divergence& e) {
        std::cerr << "numerical: " << e.what() << '\n';
        return static_cast<int>(ExitCode::numerical);
    } catch (const ConvergenceError& e) {
        std::cerr << "numerical: " << e.what() << '\n';
        return static_cast<int>(ExitCode::numerical);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::usage);
    }
}
