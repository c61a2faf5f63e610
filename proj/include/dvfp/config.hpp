#ifndef DVFP_CONFIG_HPP
#define DVFP_CONFIG_HPP

// Experiment configuration: a text file of `key = value` lines. Blank lines
// and lines starting with '#' are ignored. Grids are either comma lists or
// `linspace:lo:hi:n` / `logspace:lo:hi:n` (log-uniform from lo to hi).
// Infinite values are written `inf`. README.md lists the keys.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dvfp/csv.hpp"
#include "dvfp/error.hpp"
#include "dvfp/model.hpp"
#include "dvfp/simulator.hpp"

namespace dvfp {

/// Config syntax error with the offending line number (0 when not tied to a line).
class ConfigError : public InvalidInput {
  public:
    ConfigError(const std::string& what, std::size_t line)
        : InvalidInput(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n == 0) throw InvalidInput("linspace: n must be >= 1");
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k)
        v[k] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    return v;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi > 0.0)) throw InvalidInput("logspace: bounds must be positive");
    std::vector<double> v = linspace(std::log(lo), std::log(hi), n);
    for (double& x : v) x = std::exp(x);
    if (n > 1) {
        v.front() = lo;
        v.back() = hi;
    }
    return v;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

/// Parses a grid value: comma list, linspace:lo:hi:n or logspace:lo:hi:n.
inline std::vector<double> parse_grid(const std::string& text) {
    const std::string s = trim(text);
    std::vector<std::string> parts;
    auto split = [&](char sep) {
        parts.clear();
        std::string cell;
        std::istringstream ss(s);
        while (std::getline(ss, cell, sep)) parts.push_back(trim(cell));
    };
    if (s.rfind("linspace:", 0) == 0 || s.rfind("logspace:", 0) == 0) {
        split(':');
        if (parts.size() != 4) throw InvalidInput("grid '" + s + "' must be kind:lo:hi:n");
        const double lo = parse_number(parts[1]);
        const double hi = parse_number(parts[2]);
        const double n = parse_number(parts[3]);
        if (!(n >= 1.0) || n != std::floor(n)) throw InvalidInput("grid point count must be a positive integer");
        return parts[0] == "linspace" ? linspace(lo, hi, static_cast<std::size_t>(n))
                                      : logspace(lo, hi, static_cast<std::size_t>(n));
    }
    split(',');
    std::vector<double> v;
    for (const auto& p : parts) v.push_back(parse_number(p));
    if (v.empty()) throw InvalidInput("grid is empty");
    return v;
}

inline std::string format_grid(const std::vector<double>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + format_number(v[k]);
    return s;
}

struct ExperimentSpec {
    std::string experiment = "default";
    std::string out_dir = ".";

    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> gamma_grid = linspace(0.05, 10.0, 200);
    std::vector<double> H_list = logspace(1e-3, 1e3, 50);
    double eta = 0.25;
    double H = 0.0;

    double dt = 1e-3;
    double t_final = 1.0;
    std::size_t n = 100;
    std::uint64_t seed = 1;
    std::size_t stride = 1;
    std::size_t batches = 10;

    double init_x_std = 1.0;
    double init_v_std = 1.0;
    double init_x_shift = 1.0;  ///< added to the positions of the second ensemble in coupled runs

    PotentialSpec model;
    double gamma = 1.0;
    double sigma = 1.0;

    double tol_fit_se = 3.0;       ///< pass if lambda_fit >= lambda_predicted - tol_fit_se * SE
    double tol_fit_discard = 0.1;  ///< fraction of the horizon dropped before fitting
    double tol_slack_se = 3.0;     ///< inequality slack in batch standard errors

    DriftModel drift_model() const { return make_potential(model).drift(gamma, sigma, H); }

    SimConfig sim_config() const {
        SimConfig c;
        c.dt = dt;
        c.t_final = t_final;
        c.n = n;
        c.seed = seed;
        c.stride = stride;
        return c;
    }

    void validate() const {
        if (seeds.empty()) throw ConfigError("seeds must be nonempty", 0);
        if (gamma_grid.empty()) throw ConfigError("gamma_grid must be nonempty", 0);
        if (H_list.empty()) throw ConfigError("H_list must be nonempty", 0);
        if (!(H >= 0.0)) throw ConfigError("H must be in [0, inf]", 0);
        if (!(eta >= 0.0)) throw ConfigError("eta must be >= 0", 0);
        sim_config().validate();
    }
};

namespace detail {

struct KeyHandler {
    std::function<void(ExperimentSpec&, const std::string&)> set;
    std::function<std::string(const ExperimentSpec&)> get;
};

inline std::size_t parse_count(const std::string& s) {
    const double v = parse_number(s);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e15) throw InvalidInput("expected a nonnegative integer, got '" + s + "'");
    return static_cast<std::size_t>(v);
}

inline std::string format_count(std::uint64_t v) { return std::to_string(v); }

inline const std::map<std::string, KeyHandler>& config_keys() {
    static const std::map<std::string, KeyHandler> keys = [] {
        std::map<std::string, KeyHandler> k;
        auto num = [&k](const std::string& name, double ExperimentSpec::*field) {
            k[name] = {[field](ExperimentSpec& s, const std::string& v) { s.*field = parse_number(v); },
                       [field](const ExperimentSpec& s) { return format_number(s.*field); }};
        };
        auto count = [&k](const std::string& name, std::size_t ExperimentSpec::*field) {
            k[name] = {[field](ExperimentSpec& s, const std::string& v) { s.*field = parse_count(v); },
                       [field](const ExperimentSpec& s) { return format_count(s.*field); }};
        };
        auto grid = [&k](const std::string& name, std::vector<double> ExperimentSpec::*field) {
            k[name] = {[field](ExperimentSpec& s, const std::string& v) { s.*field = parse_grid(v); },
                       [field](const ExperimentSpec& s) { return format_grid(s.*field); }};
        };
        auto text = [&k](const std::string& name, std::string ExperimentSpec::*field) {
            k[name] = {[field](ExperimentSpec& s, const std::string& v) { s.*field = v; },
                       [field](const ExperimentSpec& s) { return s.*field; }};
        };
        auto model_num = [&k](const std::string& name, double PotentialSpec::*field) {
            k[name] = {[field](ExperimentSpec& s, const std::string& v) { s.model.*field = parse_number(v); },
                       [field](const ExperimentSpec& s) { return format_number(s.model.*field); }};
        };
        auto model_text = [&k](const std::string& name, std::string PotentialSpec::*field) {
            k[name] = {[field](ExperimentSpec& s, const std::string& v) { s.model.*field = v; },
                       [field](const ExperimentSpec& s) { return s.model.*field; }};
        };

        text("experiment", &ExperimentSpec::experiment);
        text("out_dir", &ExperimentSpec::out_dir);
        k["seeds"] = {[](ExperimentSpec& s, const std::string& v) {
                          s.seeds.clear();
                          for (double x : parse_grid(v)) {
                              if (!(x >= 0.0) || x != std::floor(x)) throw InvalidInput("seeds must be integers");
                              s.seeds.push_back(static_cast<std::uint64_t>(x));
                          }
                      },
                      [](const ExperimentSpec& s) {
                          std::string out;
                          for (std::size_t i = 0; i < s.seeds.size(); ++i) out += (i ? "," : "") + format_count(s.seeds[i]);
                          return out;
                      }};
        grid("gamma_grid", &ExperimentSpec::gamma_grid);
        grid("H_list", &ExperimentSpec::H_list);
        num("eta", &ExperimentSpec::eta);
        num("H", &ExperimentSpec::H);
        num("dt", &ExperimentSpec::dt);
        num("t_final", &ExperimentSpec::t_final);
        count("n", &ExperimentSpec::n);
        k["seed"] = {[](ExperimentSpec& s, const std::string& v) { s.seed = parse_count(v); },
                     [](const ExperimentSpec& s) { return format_count(s.seed); }};
        count("stride", &ExperimentSpec::stride);
        count("batches", &ExperimentSpec::batches);
        num("init.x_std", &ExperimentSpec::init_x_std);
        num("init.v_std", &ExperimentSpec::init_v_std);
        num("init.x_shift", &ExperimentSpec::init_x_shift);
        k["model.dimension"] = {[](ExperimentSpec& s, const std::string& v) {
                                    s.model.dimension = static_cast<int>(parse_count(v));
                                },
                                [](const ExperimentSpec& s) { return std::to_string(s.model.dimension); }};
        model_num("model.alpha", &PotentialSpec::alpha);
        model_text("model.confinement", &PotentialSpec::confinement);
        model_num("model.confinement_eps", &PotentialSpec::confinement_eps);
        model_text("model.interaction", &PotentialSpec::interaction);
        model_num("model.interaction_c", &PotentialSpec::interaction_c);
        model_num("model.interaction_eps", &PotentialSpec::interaction_eps);
        model_num("model.box", &PotentialSpec::box);
        num("model.gamma", &ExperimentSpec::gamma);
        num("model.sigma", &ExperimentSpec::sigma);
        num("tol.fit_se", &ExperimentSpec::tol_fit_se);
        num("tol.fit_discard", &ExperimentSpec::tol_fit_discard);
        num("tol.slack_se", &ExperimentSpec::tol_slack_se);
        return k;
    }();
    return keys;
}

}  // namespace detail

/// Sorted list of accepted keys.
inline std::vector<std::string> config_key_names() {
    std::vector<std::string> out;
    for (const auto& [k, h] : detail::config_keys()) out.push_back(k);
    return out;
}

/// Applies one `key = value` assignment.
inline void set_config_value(ExperimentSpec& spec, const std::string& key, const std::string& value,
                             std::size_t line = 0) {
    const auto& keys = detail::config_keys();
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError("unknown key '" + key + "'", line);
    try {
        it->second.set(spec, value);
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidInput& e) {
        throw ConfigError("key '" + key + "': " + e.what(), line);
    }
}

inline ExperimentSpec parse_config(std::istream& is) {
    ExperimentSpec spec;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", lineno);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("missing key before '='", lineno);
        set_config_value(spec, key, value, lineno);
    }
    spec.validate();
    return spec;
}

inline ExperimentSpec parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline ExperimentSpec load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'", 0);
    return parse_config(is);
}

/// Canonical text: every key in sorted order with normalized values.
inline std::string dump_config(const ExperimentSpec& spec) {
    std::string out;
    for (const auto& [k, h] : detail::config_keys()) out += k + " = " + h.get(spec) + "\n";
    return out;
}

inline std::string normalize_config(const std::string& text) { return dump_config(parse_config_string(text)); }

/// Every key as CSV metadata.
inline Metadata config_metadata(const ExperimentSpec& spec) {
    Metadata m;
    for (const auto& [k, h] : detail::config_keys()) m.emplace_back(k, h.get(spec));
    return m;
}

}  // namespace dvfp

#endif
