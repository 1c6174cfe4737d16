#include "fbsde/lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "fbsde/density.hpp"
#include "fbsde/errors.hpp"
#include "fbsde/serialize.hpp"

namespace fbsde {

namespace {

constexpr double kPassFraction = 0.99;  // envelope bracketing quota

std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw LabError("cannot create output directory " + dir);
}

std::string time_tag(double t) { return "t" + format_double(t); }

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s2 = 0.0;
    for (double x : v) s2 += (x - mean) * (x - mean);
    return std::sqrt(s2 / (v.size() - 1));
}

int finish(const RunReport& report, const std::string& out_dir) {
    report.write(join(out_dir, "report.json"));
    return report.all_passed() ? 0 : 1;
}

void print_check(const std::string& name, bool pass, double value,
                 double tolerance) {
    std::printf("%s %s (value=%s, tol=%s)\n", pass ? "[ ok ]" : "[FAIL]",
                name.c_str(), format_double(value).c_str(),
                format_double(tolerance).c_str());
}

void check(RunReport& report, const std::string& name, bool pass, double value,
           double tolerance) {
    report.add_check(name, pass, value, tolerance);
    print_check(name, pass, value, tolerance);
}

// Envelope-vs-KDE comparison written as one density CSV; the check passes
// when the bracketing quota is met.
void run_density_check(RunReport& report, const std::string& out_dir,
                       const std::string& label,
                       const std::vector<double>& samples,
                       const DensityEnvelope& env, double region_sd,
                       double slack) {
    const EmpiricalDensity emp = kde(samples);
    const double sd = sample_sd(samples);
    const EnvelopeCheck chk = verify_envelope(emp, env, env.m - region_sd * sd,
                                              env.m + region_sd * sd, slack);
    std::vector<std::vector<double>> rows;
    rows.reserve(chk.points);
    for (std::size_t i = 0; i < chk.points; ++i)
        rows.push_back({chk.x[i], chk.lower[i], chk.upper[i], chk.estimate[i],
                        chk.se[i], chk.ok[i] ? 1.0 : 0.0});
    const std::string file = "density_" + label + ".csv";
    write_csv(join(out_dir, file),
              {"x", "lower", "upper", "kde", "local_se", "pass"}, rows);
    report.add_file(join(out_dir, file));
    check(report, "envelope-" + label, chk.fraction >= kPassFraction,
          chk.fraction, kPassFraction);
}

}  // namespace

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_dir,
                 const std::string& kind, int grid_points) {
    ensure_dir(out_dir);
    RunReport report(cfg);
    if (grid_points < 1 || grid_points > 4096)
        throw ValidationError("grid points must lie in [1, 4096]");
    PathKind pk;
    if (kind == "fbm")
        pk = PathKind::FbmValues;
    else if (kind == "weighted")
        pk = PathKind::WeightedIntegral;
    else
        throw ValidationError("kind must be fbm or weighted");

    std::vector<double> grid(grid_points);
    for (int j = 0; j < grid_points; ++j)
        grid[j] = cfg.horizon * (j + 1) / grid_points;

    const FbmEnsemble ens = sample_paths(cfg.hurst, grid, cfg.paths, cfg.seed,
                                         pk, cfg.coeffs.sigma, cfg.threads);
    write_ensemble(join(out_dir, "ensemble.bin"), ens);
    report.add_file(join(out_dir, "ensemble.bin"));
    if (cfg.paths <= 4096) {
        write_ensemble_csv(join(out_dir, "ensemble.csv"), ens);
        report.add_file(join(out_dir, "ensemble.csv"));
    }

    const Eigen::MatrixXd exact = pk == PathKind::FbmValues
                                      ? fbm_gram(cfg.hurst, grid)
                                      : weighted_gram(cfg.hurst, cfg.coeffs.sigma, grid);
    Eigen::MatrixXd emp, se;
    empirical_gram(ens.paths, emp, se);
    std::size_t within = 0, total = 0;
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < exact.rows(); ++i)
        for (int j = i; j < exact.cols(); ++j) {
            const double diff = std::abs(emp(i, j) - exact(i, j));
            const bool ok = diff <= 3.0 * se(i, j);
            ++total;
            within += ok;
            rows.push_back({grid[i], grid[j], exact(i, j), emp(i, j), se(i, j),
                            ok ? 1.0 : 0.0});
        }
    write_csv(join(out_dir, "gram_check.csv"),
              {"s", "t", "exact", "empirical", "std_error", "pass"}, rows);
    report.add_file(join(out_dir, "gram_check.csv"));
    const double fraction = static_cast<double>(within) / total;
    check(report, "gram-within-3se", fraction >= 0.98, fraction, 0.98);
    return finish(report, out_dir);
}

int cmd_iota(const ExperimentConfig& cfg, const std::string& out_dir,
             int grid_points) {
    ensure_dir(out_dir);
    RunReport report(cfg);
    if (grid_points < 2 || grid_points > 100000)
        throw ValidationError("grid points must lie in [2, 100000]");
    std::vector<std::vector<double>> rows;
    double min_deriv = 0.0;
    for (int j = 0; j < grid_points; ++j) {
        const double t = cfg.horizon * j / (grid_points - 1);
        const double v = iota(cfg.coeffs.sigma, t, cfg.hurst);
        const double d = iota_derivative(cfg.coeffs.sigma, t, cfg.hurst);
        min_deriv = std::min(min_deriv, d);
        rows.push_back({t, v, d});
    }
    write_csv(join(out_dir, "iota.csv"), {"t", "iota", "iota_derivative"}, rows);
    report.add_file(join(out_dir, "iota.csv"));
    check(report, "iota-nondecreasing", min_deriv >= -1e-12, min_deriv, -1e-12);
    check(report, "iota-horizon-positive", rows.back()[1] > 0, rows.back()[1],
          0.0);
    return finish(report, out_dir);
}

int cmd_solve_pde(const ExperimentConfig& cfg, const std::string& out_dir) {
    if (cfg.problem == "gauss-transfer")
        throw ValidationError(
            "solve-pde handles driver problems; use the transfer command");
    ensure_dir(out_dir);
    RunReport report(cfg);
    const NonlinearFbsdeSpec spec = cfg.build_nonlinear_spec();
    if (spec.lipschitz > 0) spec.validate_lipschitz();
    const PdeSolution sol = solve_mixed_pde(spec, cfg.pde_options());

    double terminal_err = 0.0;
    const Eigen::Index last = sol.u.rows() - 1;
    for (Eigen::Index j = 0; j < sol.u.cols(); ++j)
        terminal_err = std::max(terminal_err,
                                std::abs(sol.u(last, j) -
                                         spec.terminal.h(sol.x_grid[j])));
    check(report, "terminal-row-exact", terminal_err <= 1e-12, terminal_err,
          1e-12);
    check(report, "fixed-point-converged",
          sol.stats.max_step_residual <= 1e-8, sol.stats.max_step_residual,
          1e-8);
    report.note("fixed_point_iterations",
                std::to_string(sol.stats.max_fp_iters_used));
    report.note("upwind_blend_steps",
                std::to_string(sol.stats.upwind_blend_steps));
    report.note("y0", format_double(
                          evaluate_solution(sol, 0.0, cfg.coeffs.eta0).u));

    write_surface(join(out_dir, "surface.bin"), sol, cfg.raw_json);
    report.add_file(join(out_dir, "surface.bin"));
    return finish(report, out_dir);
}

int cmd_linear_solve(const ExperimentConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    RunReport report(cfg);
    LinearFbsdeSpec spec = cfg.build_linear_spec();
    spec.check_convexity = false;
    report.note("hypothesis_bounds",
                spec.validate(false) ? "satisfied" : "violated");

    std::vector<std::vector<double>> rows;
    bool finite = true;
    double terminal_gap = 0.0;
    for (double t : cfg.times) {
        const double sd = std::sqrt(std::max(spec.iota_at(t), 0.0));
        const int half = sd > 0 ? 4 : 0;
        for (int k = -half; k <= half; ++k) {
            const double w = 0.75 * sd * k;
            const LinearValue v = linear_solve(spec, t, w);
            finite = finite && std::isfinite(v.y) && std::isfinite(v.z);
            rows.push_back({t, w, v.y, v.z});
            if (t == cfg.horizon) {
                const double eta =
                    cfg.coeffs.eta0 + cfg.coeffs.b.integral(0, t) + w;
                terminal_gap = std::max(
                    terminal_gap, std::abs(v.y - spec.terminal.h(eta)));
            }
        }
    }
    write_csv(join(out_dir, "linear.csv"), {"t", "w", "y", "z"}, rows);
    report.add_file(join(out_dir, "linear.csv"));
    check(report, "values-finite", finite, finite ? 1.0 : 0.0, 1.0);
    if (std::find(cfg.times.begin(), cfg.times.end(), cfg.horizon) !=
        cfg.times.end())
        check(report, "terminal-consistency", terminal_gap <= 1e-10,
              terminal_gap, 1e-10);
    return finish(report, out_dir);
}

namespace {

int envelope_linear(const ExperimentConfig& cfg, const std::string& out_dir,
                    RunReport& report) {
    LinearFbsdeSpec spec = cfg.build_linear_spec();
    spec.check_convexity = false;
    spec.validate(true);
    const bool do_z = spec.d2h_lo > 0;
    for (double t : cfg.times) {
        if (!(t > 0) || !(t <= cfg.horizon))
            throw ValidationError("envelope times must lie in (0, horizon]");
        const LinearSamples samples = sample_linear_marginals(
            spec, t, cfg.paths, cfg.seed, cfg.threads);
        const MarginalStats sy = linear_marginal_stats(spec, t, Target::Y);
        run_density_check(report, out_dir, "y_" + time_tag(t), samples.y,
                          gaussian_envelope(spec, t, Target::Y, sy.abs_moment),
                          cfg.region_sd, cfg.slack);
        if (do_z) {
            const MarginalStats sz = linear_marginal_stats(spec, t, Target::Z);
            run_density_check(
                report, out_dir, "z_" + time_tag(t), samples.z,
                gaussian_envelope(spec, t, Target::Z, sz.abs_moment),
                cfg.region_sd, cfg.slack);
        }
    }
    if (!do_z) report.note("z_envelope", "skipped: terminal is not strictly convex");
    return finish(report, out_dir);
}

int envelope_nonlinear(const ExperimentConfig& cfg, const std::string& out_dir,
                       RunReport& report) {
    const NonlinearFbsdeSpec spec = cfg.build_nonlinear_spec();
    if (spec.lipschitz > 0) spec.validate_lipschitz();
    const PdeSolution sol = solve_mixed_pde(spec, cfg.pde_options());
    for (double t : cfg.times) {
        if (!(t > 0) || !(t < cfg.horizon))
            throw ValidationError("envelope times must lie in (0, horizon)");
        const FbmEnsemble ens =
            sample_paths(cfg.hurst, {t}, cfg.paths, cfg.seed,
                         PathKind::WeightedIntegral, cfg.coeffs.sigma,
                         cfg.threads);
        const MarginalDraws draws = bsde_marginals(sol, spec, t, ens);
        if (draws.domain_warning) report.note("domain_warning", draws.hint);
        const Calibration cal =
            calibrate_envelope(sol, spec, t, Target::Y, cfg.envelope);
        run_density_check(report, out_dir, "y_" + time_tag(t), draws.y,
                          polynomial_envelope(cal), cfg.region_sd, cfg.slack);
        try {
            const Calibration cal_z =
                calibrate_envelope(sol, spec, t, Target::Z, cfg.envelope);
            run_density_check(report, out_dir, "z_" + time_tag(t), draws.z,
                              polynomial_envelope(cal_z), cfg.region_sd,
                              cfg.slack);
        } catch (const LabError& e) {
            report.note("z_envelope_" + time_tag(t),
                        std::string("skipped: ") + e.what());
        }
    }
    return finish(report, out_dir);
}

int envelope_transfer(const ExperimentConfig& cfg, const std::string& out_dir,
                      RunReport& report) {
    const GaussianDriverSpec spec = cfg.build_driver_spec();
    TransferOptions topts;
    topts.nx = cfg.nx;
    topts.nt = cfg.nt;
    topts.domain_width = cfg.domain_width;
    const TransferSolution sol = solve_transferred(spec, topts);
    TransferEnvelopeOptions eopts;
    eopts.probes = cfg.envelope.probes;
    eopts.quantile_span = cfg.envelope.quantile_span;
    eopts.head_room = cfg.envelope.head_room;
    for (double t : cfg.times) {
        if (!(t > 0) || !(t < cfg.horizon))
            throw ValidationError("envelope times must lie in (0, horizon)");
        const MarginalDraws draws =
            transfer_marginals(sol, t, cfg.paths, cfg.seed);
        if (draws.domain_warning) report.note("domain_warning", draws.hint);
        run_density_check(report, out_dir, "y_" + time_tag(t), draws.y,
                          general_envelope(sol, spec, t, Target::Y, eopts),
                          cfg.region_sd, cfg.slack);
        if (spec.z_dependence == ZDependence::None)
            run_density_check(report, out_dir, "z_" + time_tag(t), draws.z,
                              general_envelope(sol, spec, t, Target::Z, eopts),
                              cfg.region_sd, cfg.slack);
    }
    if (spec.z_dependence != ZDependence::None)
        report.note("z_envelope",
                    "skipped: generator depends on the derivative slot");
    return finish(report, out_dir);
}

}  // namespace

int cmd_envelope(const ExperimentConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    RunReport report(cfg);
    if (cfg.problem == "fbsde-linear")
        return envelope_linear(cfg, out_dir, report);
    if (cfg.problem == "fbsde-nonlinear")
        return envelope_nonlinear(cfg, out_dir, report);
    return envelope_transfer(cfg, out_dir, report);
}

int cmd_tails(const ExperimentConfig& cfg, const std::string& out_dir) {
    if (cfg.problem != "fbsde-linear")
        throw ValidationError("tail bounds require the fbsde-linear problem");
    ensure_dir(out_dir);
    RunReport report(cfg);
    LinearFbsdeSpec spec = cfg.build_linear_spec();
    spec.check_convexity = false;
    spec.validate(true);
    const std::size_t n = cfg.tail_sample_count();
    for (double t : cfg.times) {
        if (!(t > 0) || !(t <= cfg.horizon))
            throw ValidationError("tail times must lie in (0, horizon]");
        const LinearSamples samples =
            sample_linear_marginals(spec, t, n, cfg.seed, cfg.threads);
        const double m_y = linear_marginal_stats(spec, t, Target::Y).mean;
        const double m_z = linear_marginal_stats(spec, t, Target::Z).mean;
        const LinearTails scale = corollary_tails(spec, t, 1.0);
        std::vector<std::vector<double>> rows;
        bool all_ok = true;
        for (int target = 0; target < 2; ++target) {
            const double a2 = target == 0 ? scale.a2_y : scale.a2_z;
            const double m = target == 0 ? m_y : m_z;
            const auto& data = target == 0 ? samples.y : samples.z;
            for (int k = 1; k <= 3; ++k) {
                const double x = k * std::sqrt(a2);
                const LinearTails lt = corollary_tails(spec, t, x);
                const TailPair bound = target == 0 ? lt.y : lt.z;
                const TailPair emp = empirical_tails(data, m, x);
                auto ok = [&](double phat, double cap) {
                    const double se =
                        std::sqrt(std::max(phat * (1 - phat), 0.0) / n);
                    return phat <= cap + 3.0 * se;
                };
                const bool pass = ok(emp.up, bound.up) && ok(emp.down, bound.down);
                all_ok = all_ok && pass;
                rows.push_back({static_cast<double>(target),
                                static_cast<double>(k), x, emp.up, bound.up,
                                emp.down, bound.down, pass ? 1.0 : 0.0});
            }
        }
        const std::string file = "tails_" + time_tag(t) + ".csv";
        write_csv(join(out_dir, file),
                  {"target", "x", "scaled_x", "empirical_up", "bound_up",
                   "empirical_down", "bound_down", "pass"},
                  rows);
        report.add_file(join(out_dir, file));
        check(report, "tails-dominated-" + time_tag(t), all_ok,
              all_ok ? 1.0 : 0.0, 1.0);
    }
    return finish(report, out_dir);
}

int cmd_transfer(const ExperimentConfig& cfg, const std::string& out_dir) {
    if (cfg.problem != "gauss-transfer")
        throw ValidationError("transfer requires the gauss-transfer problem");
    ensure_dir(out_dir);
    RunReport report(cfg);
    const GaussianDriverSpec spec = cfg.build_driver_spec();
    TransferOptions topts;
    topts.nx = cfg.nx;
    topts.nt = cfg.nt;
    topts.domain_width = cfg.domain_width;
    const TransferSolution sol = solve_transferred(spec, topts);

    double round_trip = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double t = cfg.horizon * k / 100;
        round_trip = std::max(
            round_trip, std::abs(spec.clock.inverse(spec.clock.value(t)) - t));
    }
    check(report, "clock-round-trip", round_trip <= 1e-8, round_trip, 1e-8);

    const PdeSolution& surf = sol.surface;
    double terminal_err = 0.0;
    const Eigen::Index last = surf.u.rows() - 1;
    for (Eigen::Index j = 0; j < surf.u.cols(); ++j)
        terminal_err = std::max(terminal_err,
                                std::abs(surf.u(last, j) -
                                         spec.terminal.h(surf.x_grid[j])));
    check(report, "terminal-row-exact", terminal_err <= 1e-12, terminal_err,
          1e-12);
    report.note("y0", format_double(transfer_point(sol, 0.0, 0.0).u));

    write_surface(join(out_dir, "transfer_surface.bin"), surf, cfg.raw_json);
    report.add_file(join(out_dir, "transfer_surface.bin"));
    return finish(report, out_dir);
}

int cmd_represent(const ExperimentConfig& cfg, const std::string& out_dir) {
    if (cfg.problem != "gauss-transfer")
        throw ValidationError("represent requires the gauss-transfer problem");
    ensure_dir(out_dir);
    RunReport report(cfg);
    const GaussianDriverSpec spec = cfg.build_driver_spec();

    std::vector<double> eps = cfg.eps_sweep;
    if (eps.empty())
        for (double f : {0.2, 0.1, 0.05, 0.025})
            eps.push_back(f * (cfg.horizon - cfg.rep_t));
    std::sort(eps.begin(), eps.end(), std::greater<>());

    RepresentationOptions opts;
    opts.estimator = cfg.rep_estimator;
    opts.seed = cfg.seed;
    opts.n_paths = cfg.paths;
    const RepresentationSweep sweep =
        representation_check(spec, cfg.rep_t, cfg.rep_y, cfg.rep_z, eps, opts);

    std::vector<std::vector<double>> rows;
    for (const RepresentationPoint& p : sweep.points)
        rows.push_back({p.eps, p.clock_increment, p.y_eps, p.quotient,
                        sweep.target, p.error});
    write_csv(join(out_dir, "represent.csv"),
              {"eps", "clock_increment", "y_eps", "diff_quotient", "target",
               "error"},
              rows);
    report.add_file(join(out_dir, "represent.csv"));

    const double e_first = sweep.points.front().error;
    const double e_last = sweep.points.back().error;
    check(report, "error-contracts", e_last < e_first / 3.0,
          e_first > 0 ? e_last / e_first : 0.0, 1.0 / 3.0);
    check(report, "rate-at-least-half", sweep.slope >= 0.5, sweep.slope, 0.5);
    return finish(report, out_dir);
}

}  // namespace fbsde
