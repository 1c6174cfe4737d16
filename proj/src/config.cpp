#include "fbsde/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "fbsde/errors.hpp"
#include "fbsde/serialize.hpp"

namespace fbsde {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw ValidationError("config: " + where + ": " + what);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) known = true;
        if (!known) bad(where, "unknown key \"" + it.key() + "\"");
    }
}

double need_number(const json& obj, const std::string& where,
                   const char* key) {
    if (!obj.contains(key)) bad(where, std::string("missing \"") + key + "\"");
    if (!obj[key].is_number()) bad(where, std::string("\"") + key + "\" must be a number");
    return obj[key].get<double>();
}

double opt_number(const json& obj, const std::string& where, const char* key,
                  double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) bad(where, std::string("\"") + key + "\" must be a number");
    return obj[key].get<double>();
}

std::string opt_string(const json& obj, const std::string& where,
                       const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) bad(where, std::string("\"") + key + "\" must be a string");
    return obj[key].get<std::string>();
}

std::vector<double> number_array(const json& arr, const std::string& where) {
    if (!arr.is_array()) bad(where, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number()) bad(where, "expected an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

Coefficient parse_coefficient(const json& node, const std::string& where) {
    if (node.is_number()) return Coefficient::constant(node.get<double>());
    if (!node.is_object()) bad(where, "expected a number or an object");
    check_keys(node, where, {"kind", "value", "coeffs", "t", "v"});
    const std::string kind = opt_string(node, where, "kind", "");
    if (kind == "constant")
        return Coefficient::constant(need_number(node, where, "value"));
    if (kind == "polynomial") {
        if (!node.contains("coeffs")) bad(where, "missing \"coeffs\"");
        return Coefficient::polynomial(number_array(node["coeffs"], where));
    }
    if (kind == "table") {
        if (!node.contains("t") || !node.contains("v"))
            bad(where, "table needs \"t\" and \"v\"");
        return Coefficient::table(number_array(node["t"], where),
                                  number_array(node["v"], where));
    }
    bad(where, "unknown kind \"" + kind + "\"");
}

void expect_params(const GeneratorConfig& g, std::size_t n) {
    if (g.params.size() != n)
        bad("generator", g.kind + " takes " + std::to_string(n) +
                             " parameter(s), got " +
                             std::to_string(g.params.size()));
}

}  // namespace

GeneratorFn GeneratorConfig::build(const CoefficientSet* coeffs) const {
    if (kind == "none") return nullptr;
    if (kind == "driver-linear") {
        if (!coeffs)
            bad("generator", "driver-linear needs the coefficient set");
        const CoefficientSet c = *coeffs;
        return [c](double t, double, double y, double z) {
            return c.alpha(t) + c.beta(t) * y - c.gamma(t) * z;
        };
    }
    if (kind == "tanh-sin") {
        expect_params(*this, 2);
        const double a = params[0], b = params[1];
        return [a, b](double, double, double y, double z) {
            return a * std::tanh(y) + b * std::sin(z);
        };
    }
    if (kind == "tanh-x-z") {
        expect_params(*this, 3);
        const double a = params[0], b = params[1], c = params[2];
        return [a, b, c](double, double x, double y, double z) {
            return a * std::tanh(y) + b * std::tanh(x) + c * z;
        };
    }
    if (kind == "cos-tanh-sin") {
        expect_params(*this, 3);
        const double a = params[0], b = params[1], c = params[2];
        return [a, b, c](double t, double, double y, double z) {
            return (a + b * std::cos(t)) * std::tanh(y) + c * std::sin(z);
        };
    }
    bad("generator", "unknown kind \"" + kind + "\"");
}

double GeneratorConfig::lipschitz(const CoefficientSet* coeffs,
                                  double horizon) const {
    if (kind == "none") return 0.0;
    if (kind == "driver-linear") {
        if (!coeffs) return 0.0;
        const double by = std::max(std::abs(coeffs->beta.min_on(0, horizon)),
                                   std::abs(coeffs->beta.max_on(0, horizon)));
        const double bz = std::max(std::abs(coeffs->gamma.min_on(0, horizon)),
                                   std::abs(coeffs->gamma.max_on(0, horizon)));
        return std::max(by, bz);
    }
    if (kind == "tanh-sin")
        return std::max(std::abs(params[0]), std::abs(params[1]));
    if (kind == "tanh-x-z")
        return std::max(std::abs(params[0]), std::abs(params[2]));
    if (kind == "cos-tanh-sin")
        return std::max(std::abs(params[0]) + std::abs(params[1]),
                        std::abs(params[2]));
    return 0.0;
}

std::string GeneratorConfig::describe() const {
    std::string s = kind;
    for (double p : params) s += " " + format_double(p);
    return s;
}

TerminalMap ExperimentConfig::build_terminal() const {
    const auto& p = terminal_params;
    auto want = [&](std::size_t n) {
        if (p.size() != n)
            bad("terminal", terminal_kind + " takes " + std::to_string(n) +
                                " parameter(s), got " + std::to_string(p.size()));
    };
    if (terminal_kind == "identity") {
        want(0);
        return terminal_identity();
    }
    if (terminal_kind == "affine") {
        want(2);
        return terminal_affine(p[0], p[1]);
    }
    if (terminal_kind == "softplus") {
        want(1);
        return terminal_softplus(p[0]);
    }
    if (terminal_kind == "cubic") {
        want(2);
        return terminal_cubic(p[0], p[1]);
    }
    if (terminal_kind == "exp") {
        want(1);
        return terminal_exp(p[0]);
    }
    bad("terminal", "unknown kind \"" + terminal_kind + "\"");
}

LinearFbsdeSpec ExperimentConfig::build_linear_spec() const {
    LinearFbsdeSpec spec;
    spec.coeffs = coeffs;
    spec.terminal = build_terminal();
    spec.hurst = hurst;
    spec.horizon = horizon;
    spec.fit_bounds_from_probes();
    return spec;
}

NonlinearFbsdeSpec ExperimentConfig::build_nonlinear_spec() const {
    NonlinearFbsdeSpec spec;
    spec.coeffs = coeffs;
    spec.terminal = build_terminal();
    spec.generator = generator.build(&coeffs);
    spec.hurst = hurst;
    spec.horizon = horizon;
    spec.lipschitz = generator.lipschitz(&coeffs, horizon);
    spec.generator_name = generator.describe();
    return spec;
}

GaussianDriverSpec ExperimentConfig::build_driver_spec() const {
    GaussianDriverSpec spec;
    if (clock_kind == "linear") {
        spec.clock = VarianceClock::linear(horizon);
    } else if (clock_kind == "power") {
        spec.clock = VarianceClock::power(clock_scale, clock_exponent, horizon);
    } else if (clock_kind == "table") {
        std::vector<double> t, v;
        read_two_column_csv(clock_csv, t, v);
        spec.clock = VarianceClock::table(std::move(t), std::move(v));
    } else {
        bad("clock", "unknown kind \"" + clock_kind + "\"");
    }
    spec.terminal = build_terminal();
    spec.generator = generator.build(&coeffs);
    if (z_dependence == "none")
        spec.z_dependence = ZDependence::None;
    else if (z_dependence == "linear")
        spec.z_dependence = ZDependence::Linear;
    else if (z_dependence == "nonlinear")
        spec.z_dependence = ZDependence::Nonlinear;
    else
        bad("z_dependence", "must be none, linear or nonlinear");
    spec.label = generator.describe() + " / " + terminal_kind;
    return spec;
}

PdeSolveOptions ExperimentConfig::pde_options() const {
    PdeSolveOptions opts;
    opts.nx = nx;
    opts.nt = nt;
    opts.domain_width = domain_width;
    opts.time_grading = time_grading;
    return opts;
}

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: not valid JSON: ") + e.what());
    }
    if (!root.is_object()) bad("top level", "expected a JSON object");
    check_keys(root, "top level",
               {"problem", "horizon", "hurst", "seed", "threads",
                "coefficients", "terminal", "generator", "grids", "samples",
                "envelope", "clock", "z_dependence", "times", "eps_sweep",
                "representation"});

    ExperimentConfig cfg;
    cfg.raw_json = json_text;
    cfg.problem = opt_string(root, "top level", "problem", cfg.problem);
    if (cfg.problem != "fbsde-linear" && cfg.problem != "fbsde-nonlinear" &&
        cfg.problem != "gauss-transfer")
        bad("problem", "must be fbsde-linear, fbsde-nonlinear or gauss-transfer");
    cfg.horizon = opt_number(root, "top level", "horizon", cfg.horizon);
    if (!(cfg.horizon > 0)) bad("horizon", "must be positive");
    cfg.hurst = opt_number(root, "top level", "hurst", cfg.hurst);
    if (cfg.problem != "gauss-transfer" &&
        !(cfg.hurst > 0.5 && cfg.hurst < 1.0))
        bad("hurst", "driver problems need H in (1/2, 1)");
    const double seed = opt_number(root, "top level", "seed",
                                   static_cast<double>(cfg.seed));
    if (seed < 0 || seed != std::floor(seed)) bad("seed", "must be a nonnegative integer");
    cfg.seed = static_cast<std::uint64_t>(seed);
    const double threads = opt_number(root, "top level", "threads", 1.0);
    if (threads < 1 || threads != std::floor(threads) || threads > 256)
        bad("threads", "must be an integer in [1, 256]");
    cfg.threads = static_cast<int>(threads);

    if (root.contains("coefficients")) {
        const json& c = root["coefficients"];
        if (!c.is_object()) bad("coefficients", "expected an object");
        check_keys(c, "coefficients",
                   {"b", "sigma", "alpha", "beta", "gamma", "eta0"});
        if (c.contains("b")) cfg.coeffs.b = parse_coefficient(c["b"], "coefficients.b");
        if (c.contains("sigma"))
            cfg.coeffs.sigma = parse_coefficient(c["sigma"], "coefficients.sigma");
        if (c.contains("alpha"))
            cfg.coeffs.alpha = parse_coefficient(c["alpha"], "coefficients.alpha");
        if (c.contains("beta"))
            cfg.coeffs.beta = parse_coefficient(c["beta"], "coefficients.beta");
        if (c.contains("gamma"))
            cfg.coeffs.gamma = parse_coefficient(c["gamma"], "coefficients.gamma");
        cfg.coeffs.eta0 = opt_number(c, "coefficients", "eta0", 0.0);
    }
    if (cfg.problem != "gauss-transfer")
        cfg.coeffs.validate_sigma(cfg.horizon);

    if (root.contains("terminal")) {
        const json& t = root["terminal"];
        if (!t.is_object()) bad("terminal", "expected an object");
        check_keys(t, "terminal", {"kind", "params"});
        cfg.terminal_kind = opt_string(t, "terminal", "kind", cfg.terminal_kind);
        cfg.terminal_params.clear();
        if (t.contains("params"))
            cfg.terminal_params = number_array(t["params"], "terminal.params");
    }

    if (root.contains("generator")) {
        const json& g = root["generator"];
        if (!g.is_object()) bad("generator", "expected an object");
        check_keys(g, "generator", {"kind", "params"});
        cfg.generator.kind = opt_string(g, "generator", "kind", "none");
        if (g.contains("params"))
            cfg.generator.params = number_array(g["params"], "generator.params");
    }

    if (root.contains("grids")) {
        const json& g = root["grids"];
        if (!g.is_object()) bad("grids", "expected an object");
        check_keys(g, "grids", {"nx", "nt", "domain_width", "time_grading"});
        cfg.nx = static_cast<int>(opt_number(g, "grids", "nx", cfg.nx));
        cfg.nt = static_cast<int>(opt_number(g, "grids", "nt", cfg.nt));
        cfg.domain_width = opt_number(g, "grids", "domain_width", cfg.domain_width);
        cfg.time_grading = opt_number(g, "grids", "time_grading", cfg.time_grading);
        if (cfg.nx < 5) bad("grids.nx", "need at least 5 space points");
        if (cfg.nt < 2) bad("grids.nt", "need at least 2 time points");
        if (!(cfg.domain_width > 0)) bad("grids.domain_width", "must be positive");
        if (!(cfg.time_grading >= 1)) bad("grids.time_grading", "must be >= 1");
    }

    if (root.contains("samples")) {
        const json& s = root["samples"];
        if (!s.is_object()) bad("samples", "expected an object");
        check_keys(s, "samples", {"paths", "tail_paths"});
        const double p = opt_number(s, "samples", "paths",
                                    static_cast<double>(cfg.paths));
        if (p < 2 || p != std::floor(p)) bad("samples.paths", "must be an integer >= 2");
        cfg.paths = static_cast<std::size_t>(p);
        const double tp = opt_number(s, "samples", "tail_paths", 0.0);
        if (tp < 0 || tp != std::floor(tp))
            bad("samples.tail_paths", "must be a nonnegative integer");
        cfg.tail_paths = static_cast<std::size_t>(tp);
    }

    if (root.contains("envelope")) {
        const json& e = root["envelope"];
        if (!e.is_object()) bad("envelope", "expected an object");
        check_keys(e, "envelope",
                   {"epsilon", "delta", "probes", "quantile_span", "head_room",
                    "slack", "region_sd"});
        cfg.envelope.eps = opt_number(e, "envelope", "epsilon", cfg.envelope.eps);
        cfg.envelope.delta = opt_number(e, "envelope", "delta", cfg.envelope.delta);
        cfg.envelope.probes =
            static_cast<int>(opt_number(e, "envelope", "probes", cfg.envelope.probes));
        cfg.envelope.quantile_span =
            opt_number(e, "envelope", "quantile_span", cfg.envelope.quantile_span);
        cfg.envelope.head_room =
            opt_number(e, "envelope", "head_room", cfg.envelope.head_room);
        cfg.slack = opt_number(e, "envelope", "slack", cfg.slack);
        cfg.region_sd = opt_number(e, "envelope", "region_sd", cfg.region_sd);
        if (!(cfg.envelope.eps >= 0) || !(cfg.envelope.delta >= 0))
            bad("envelope", "epsilon and delta must be nonnegative");
        if (cfg.envelope.probes < 11) bad("envelope.probes", "need at least 11");
        if (!(cfg.envelope.head_room >= 1.0))
            bad("envelope.head_room", "must be >= 1");
        if (!(cfg.slack > 0)) bad("envelope.slack", "must be positive");
        if (!(cfg.region_sd > 0)) bad("envelope.region_sd", "must be positive");
    }

    if (root.contains("clock")) {
        const json& c = root["clock"];
        if (!c.is_object()) bad("clock", "expected an object");
        check_keys(c, "clock", {"kind", "scale", "exponent", "csv"});
        cfg.clock_kind = opt_string(c, "clock", "kind", cfg.clock_kind);
        cfg.clock_scale = opt_number(c, "clock", "scale", cfg.clock_scale);
        cfg.clock_exponent = opt_number(c, "clock", "exponent", cfg.clock_exponent);
        cfg.clock_csv = opt_string(c, "clock", "csv", cfg.clock_csv);
        if (cfg.clock_kind == "power" &&
            (!(cfg.clock_scale > 0) || !(cfg.clock_exponent > 0)))
            bad("clock", "power clock needs positive scale and exponent");
        if (cfg.clock_kind == "table" && cfg.clock_csv.empty())
            bad("clock", "table clock needs a csv path");
    }
    cfg.z_dependence =
        opt_string(root, "top level", "z_dependence", cfg.z_dependence);

    if (root.contains("times")) {
        cfg.times = number_array(root["times"], "times");
        if (cfg.times.empty()) bad("times", "must not be empty");
        for (double t : cfg.times)
            if (t < 0 || t > cfg.horizon) bad("times", "entries must lie in [0, horizon]");
    }
    if (root.contains("eps_sweep")) {
        cfg.eps_sweep = number_array(root["eps_sweep"], "eps_sweep");
        for (double e : cfg.eps_sweep)
            if (!(e > 0)) bad("eps_sweep", "entries must be positive");
    }
    if (root.contains("representation")) {
        const json& r = root["representation"];
        if (!r.is_object()) bad("representation", "expected an object");
        check_keys(r, "representation", {"t", "y", "z", "estimator"});
        cfg.rep_t = opt_number(r, "representation", "t", cfg.rep_t);
        cfg.rep_y = opt_number(r, "representation", "y", cfg.rep_y);
        cfg.rep_z = opt_number(r, "representation", "z", cfg.rep_z);
        cfg.rep_estimator =
            opt_string(r, "representation", "estimator", cfg.rep_estimator);
        if (cfg.rep_estimator != "pde" && cfg.rep_estimator != "mc")
            bad("representation.estimator", "must be pde or mc");
        if (cfg.rep_t < 0 || cfg.rep_t >= cfg.horizon)
            bad("representation.t", "must lie in [0, horizon)");
    }

    // Eagerly exercise the registries so bad names fail at parse time.
    cfg.build_terminal();
    cfg.generator.build(&cfg.coeffs);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void RunReport::add_check(const std::string& name, bool pass, double value,
                          double tolerance) {
    names_.push_back(name);
    passes_.push_back(pass);
    values_.push_back(value);
    tolerances_.push_back(tolerance);
    if (!pass) ++failed_;
}

void RunReport::note(const std::string& key, const std::string& value) {
    notes_.emplace_back(key, value);
}

void RunReport::add_file(const std::string& path) {
    files_.emplace_back(std::filesystem::path(path).filename().string(),
                        file_digest(path));
}

std::string RunReport::to_json() const {
    json out;
    out["config"] = json::parse(config_.raw_json.empty() ? "{}" : config_.raw_json);
    json checks = json::array();
    for (std::size_t i = 0; i < names_.size(); ++i) {
        json c;
        c["name"] = names_[i];
        c["pass"] = static_cast<bool>(passes_[i]);
        c["value"] = values_[i];
        c["tolerance"] = tolerances_[i];
        checks.push_back(c);
    }
    out["checks"] = checks;
    json files = json::array();
    for (const auto& [name, digest] : files_) {
        json f;
        f["name"] = name;
        f["digest"] = digest;
        files.push_back(f);
    }
    out["files"] = files;
    json notes = json::object();
    for (const auto& [k, v] : notes_) notes[k] = v;
    out["notes"] = notes;
    out["pass"] = all_passed();
    out["failed"] = failed_;
    return out.dump(2) + "\n";
}

void RunReport::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LabError("cannot write " + path);
    out << to_json();
}

}  // namespace fbsde
