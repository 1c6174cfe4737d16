#include "fbsde/gauss_transfer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "fbsde/errors.hpp"
#include "fbsde/rng.hpp"

namespace fbsde {

VarianceClock VarianceClock::power(double scale, double exponent, double T) {
    if (!(scale > 0.0 && exponent > 0.0 && T > 0.0))
        throw ValidationError("clock needs positive scale, exponent, horizon");
    VarianceClock c;
    c.is_power_ = true;
    c.scale_ = scale;
    c.exponent_ = exponent;
    c.T_ = T;
    return c;
}

VarianceClock VarianceClock::table(std::vector<double> t, std::vector<double> v) {
    VarianceClock c;
    c.is_power_ = false;
    c.table_ = Pchip(std::move(t), std::move(v));
    c.T_ = c.table_.nodes().back();
    c.validate();
    return c;
}

void VarianceClock::validate() const {
    if (is_power_) return;
    const auto& t = table_.nodes();
    const auto& v = table_.values();
    if (t.front() != 0.0 || v.front() != 0.0)
        throw ValidationError("clock table must start at (0, 0)");
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1]))
            throw ValidationError("clock table must strictly increase");
    // The monotone interpolant of increasing data is nondecreasing; probe
    // for flat spots that would break inversion.
    for (int i = 0; i < 1000; ++i) {
        const double a = T_ * i / 1000.0, b = T_ * (i + 1) / 1000.0;
        if (!(table_.value(b) > table_.value(a)))
            throw ValidationError("clock table has a flat segment");
    }
}

double VarianceClock::value(double t) const {
    if (t < -1e-12 || t > T_ * (1.0 + 1e-12))
        throw ValidationError("clock evaluated outside [0, horizon]");
    t = std::clamp(t, 0.0, T_);
    return is_power_ ? scale_ * std::pow(t, exponent_) : table_.value(t);
}

double VarianceClock::inverse(double s) const {
    const double sT = value(T_);
    if (s < -1e-12 || s > sT * (1.0 + 1e-12))
        throw ValidationError("clock inverse outside [0, V(horizon)]");
    s = std::clamp(s, 0.0, sT);
    if (is_power_) return std::pow(s / scale_, 1.0 / exponent_);
    double lo = 0.0, hi = T_;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * T_; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (table_.value(mid) >= s)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

bool VarianceClock::is_identity() const {
    return is_power_ && scale_ == 1.0 && exponent_ == 1.0;
}

std::string VarianceClock::describe() const {
    if (is_power_)
        return "power(scale=" + std::to_string(scale_) +
               ", exponent=" + std::to_string(exponent_) + ")";
    return "table(" + std::to_string(table_.nodes().size()) + " nodes)";
}

TransferSolution solve_transferred(const GaussianDriverSpec& spec,
                                   const TransferOptions& opts) {
    const double T = spec.clock.horizon();
    const double VT = spec.clock.value(T);
    TransferSolution sol;
    sol.clock = spec.clock;
    PdeSolution& surf = sol.surface;
    // Clock-time grid graded toward 0: the inverse clock can lose
    // smoothness there for super-linear clocks.
    surf.t_grid = graded_time_grid(VT, opts.nt, 2.0);
    const double spread = opts.domain_width * std::sqrt(VT);
    surf.x_grid = uniform_grid(-spread, spread, opts.nx);
    surf.sigma_at_horizon = 1.0;

    const VarianceClock clock = spec.clock;
    ParabolicProblem problem;
    problem.diffusion = [](double) { return 0.5; };
    problem.drift = [](double) { return 0.0; };
    problem.terminal = spec.terminal.h;
    if (spec.generator) {
        const GeneratorFn f = spec.generator;
        problem.generator = [f, clock](double s, double x, double u, double p) {
            return f(clock.inverse(s), x, u, p);
        };
    }
    surf.u = march_backward(problem, surf.t_grid, surf.x_grid, opts.stepper,
                            &surf.stats);
    surf.ux = row_derivative(surf.u, surf.dx());
    surf.uxx = row_second_derivative(surf.u, surf.dx());
    return sol;
}

PdePoint transfer_point(const TransferSolution& sol, double t, double x) {
    return evaluate_solution(sol.surface, sol.clock.value(t), x);
}

namespace {

struct Rows {
    std::vector<double> value, slope;
};

Rows blended_rows(const PdeSolution& surf, double s, Target target) {
    const auto& tg = surf.t_grid;
    std::size_t j1 =
        std::upper_bound(tg.begin(), tg.end(),
                         std::clamp(s, tg.front(), tg.back())) -
        tg.begin();
    j1 = std::clamp<std::size_t>(j1, 1, tg.size() - 1);
    const std::size_t j0 = j1 - 1;
    const double span = tg[j1] - tg[j0];
    const double w1 = span > 0.0 ? (std::clamp(s, tg.front(), tg.back()) -
                                    tg[j0]) / span
                                 : 0.0;
    const std::size_t n = surf.x_grid.size();
    Rows rows;
    rows.value.resize(n);
    rows.slope.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (1.0 - w1) * surf.u(j0, i) + w1 * surf.u(j1, i);
        const double ux = (1.0 - w1) * surf.ux(j0, i) + w1 * surf.ux(j1, i);
        const double uxx = (1.0 - w1) * surf.uxx(j0, i) + w1 * surf.uxx(j1, i);
        rows.value[i] = (target == Target::Y) ? u : ux;
        rows.slope[i] = (target == Target::Y) ? ux : uxx;
    }
    return rows;
}

}  // namespace

MarginalDraws transfer_marginals(const TransferSolution& sol, double t,
                                 std::size_t n, std::uint64_t seed) {
    const double s = sol.clock.value(t);
    const double sd = std::sqrt(s);
    const Rows ry = blended_rows(sol.surface, s, Target::Y);
    const Pchip phi(sol.surface.x_grid, ry.value);
    const Pchip psi(sol.surface.x_grid, ry.slope);
    MarginalDraws out;
    out.y.resize(n);
    out.z.resize(n);
    const double lo = sol.surface.x_grid.front();
    const double hi = sol.surface.x_grid.back();
    const std::size_t n_blocks = (n + kPathBlock - 1) / kPathBlock;
    for (std::size_t blk = 0; blk < n_blocks; ++blk) {
        const std::size_t i0 = blk * kPathBlock;
        const std::size_t cnt = std::min(kPathBlock, n - i0);
        const std::vector<double> zdraw = normal_block(seed, blk, cnt);
        for (std::size_t i = 0; i < cnt; ++i) {
            double x = sd * zdraw[i];
            if (x < lo || x > hi) {
                x = std::clamp(x, lo, hi);
                ++out.clamped;
            }
            out.y[i0 + i] = phi.value(x);
            out.z[i0 + i] = psi.value(x);
        }
    }
    if (out.clamped > n / 1000) {
        out.domain_warning = true;
        out.hint = "more than 0.1% of draws left the solved box; widen "
                   "domain_width and re-solve";
    }
    return out;
}

DensityEnvelope general_envelope(const TransferSolution& sol,
                                 const GaussianDriverSpec& spec, double t,
                                 Target target,
                                 const TransferEnvelopeOptions& opts) {
    if (target == Target::Z && spec.z_dependence == ZDependence::Nonlinear)
        throw ValidationError(
            "derivative-target envelope needs at most linear z-dependence");
    const double V = sol.clock.value(t);
    if (!(V > 0.0)) throw ValidationError("degenerate marginal at t = 0");
    const double sd = std::sqrt(V);
    const Rows rows = blended_rows(sol.surface, V, target);
    const Pchip map(sol.surface.x_grid, rows.value);
    const double lo = sol.surface.x_grid.front();
    const double hi = sol.surface.x_grid.back();
    const auto map_at = [&](double x) {
        return map.value(std::clamp(x, lo, hi));
    };
    const double m =
        hermite_expectation([&](double w) { return map_at(w); }, 0.0, sd, 128);
    const double mu = hermite_expectation(
        [&](double w) { return std::abs(map_at(w) - m); }, 0.0, sd, 512);

    double g_min = std::numeric_limits<double>::infinity(), g_max = 0.0;
    for (int k = 0; k < opts.probes; ++k) {
        const double w =
            sd * opts.quantile_span * (2.0 * k / (opts.probes - 1.0) - 1.0);
        const double value = map_at(w) - m;
        const double g = g_from_surface(sol.surface, V, V, 0.0, 1.0, value, m,
                                        target);
        g_min = std::min(g_min, g);
        g_max = std::max(g_max, g);
    }
    const double c1 = 2.0 * g_min / V / opts.head_room;
    const double c2 = 2.0 * g_max / V * opts.head_room;
    if (!(c1 > 0.0 && c2 >= c1))
        throw ValidationError("transfer envelope calibration degenerate");

    DensityEnvelope env;
    env.kind = EnvelopeKind::Generic;
    env.m = m;
    env.mu = mu;
    env.lower = [m, mu, c1, c2, V](double x) {
        const double d = x - m;
        return mu / (c2 * V) * std::exp(-d * d / (c1 * V));
    };
    env.upper = [m, mu, c1, c2, V](double x) {
        const double d = x - m;
        return mu / (c1 * V) * std::exp(-d * d / (c2 * V));
    };
    const double a2 = 0.5 * c2 * V;  // = calibrated max of g
    env.tail_up = [a2](double x) { return tail_bound(0.0, a2, x).up; };
    env.tail_down = env.tail_up;
    return env;
}

namespace {

// Backward regression pass for the Monte Carlo cross-check. Common random
// numbers: the standard-normal matrix is fixed by the seed and reused for
// every eps, scaled to the clock increment.
double mc_left_value(const GaussianDriverSpec& spec, double y, double z,
                     double s0, double s1, const Eigen::MatrixXd& xi) {
    const int steps = static_cast<int>(xi.cols());
    const Eigen::Index n = xi.rows();
    const double ds = (s1 - s0) / steps;
    const double sq = std::sqrt(ds);
    Eigen::MatrixXd w(n, steps + 1);
    w.col(0).setZero();
    for (int k = 0; k < steps; ++k)
        w.col(k + 1) = w.col(k) + sq * xi.col(k);
    Eigen::VectorXd val = (y + z * w.col(steps).array()).matrix();
    const auto fill_basis = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& b) {
        b.col(0).setOnes();
        b.col(1) = x;
        b.col(2) = x.array().square().matrix();
        b.col(3) = (x.array() * x.array().square()).matrix();
    };
    Eigen::MatrixXd basis(n, 4);
    for (int k = steps - 1; k >= 1; --k) {
        fill_basis(w.col(k), basis);
        const Eigen::VectorXd dw = w.col(k + 1) - w.col(k);
        const Eigen::VectorXd zc =
            basis.colPivHouseholderQr().solve((val.array() * dw.array() / ds)
                                                  .matrix());
        const Eigen::VectorXd cc = basis.colPivHouseholderQr().solve(val);
        const Eigen::VectorXd zfit = basis * zc;
        const Eigen::VectorXd cfit = basis * cc;
        const double tk = spec.clock.inverse(s0 + k * ds);
        for (Eigen::Index i = 0; i < n; ++i)
            val(i) = cfit(i) + ds * (spec.generator
                                         ? spec.generator(tk, w(i, k), cfit(i),
                                                          zfit(i))
                                         : 0.0);
    }
    // k = 0: all paths share w = 0, conditioning degenerates to the mean.
    const double c0 = val.mean();
    const double z0 = (val.array() * (w.col(1).array() / ds)).mean();
    const double t0 = spec.clock.inverse(s0);
    return c0 + ds * (spec.generator ? spec.generator(t0, 0.0, c0, z0) : 0.0);
}

}  // namespace

RepresentationSweep representation_check(const GaussianDriverSpec& spec,
                                         double t, double y, double z,
                                         const std::vector<double>& eps_list,
                                         const RepresentationOptions& opts) {
    if (eps_list.empty()) throw ValidationError("empty eps sweep");
    const double T = spec.clock.horizon();
    RepresentationSweep sweep;
    sweep.target = spec.generator ? spec.generator(t, 0.0, y, z) : 0.0;

    Eigen::MatrixXd xi;
    if (opts.estimator == "mc") {
        xi.resize(static_cast<Eigen::Index>(opts.n_paths), opts.mc_steps);
        for (int k = 0; k < opts.mc_steps; ++k) {
            const std::vector<double> col =
                normal_block(opts.seed, static_cast<std::uint64_t>(k),
                             opts.n_paths);
            for (std::size_t i = 0; i < opts.n_paths; ++i)
                xi(static_cast<Eigen::Index>(i), k) = col[i];
        }
    } else if (opts.estimator != "pde") {
        throw ValidationError("estimator must be 'pde' or 'mc'");
    }

    for (double eps : eps_list) {
        if (!(eps > 0.0) || t + eps > T * (1.0 + 1e-12))
            throw ValidationError("eps must be positive with t + eps <= horizon");
        const double s0 = spec.clock.value(t);
        const double s1 = spec.clock.value(std::min(t + eps, T));
        const double dv = s1 - s0;
        RepresentationPoint point;
        point.eps = eps;
        point.clock_increment = dv;
        if (opts.estimator == "mc") {
            point.y_eps = mc_left_value(spec, y, z, s0, s1, xi);
        } else {
            ParabolicProblem problem;
            problem.diffusion = [](double) { return 0.5; };
            problem.drift = [](double) { return 0.0; };
            problem.terminal = [y, z](double w) { return y + z * w; };
            if (spec.generator) {
                const GeneratorFn f = spec.generator;
                const VarianceClock clock = spec.clock;
                problem.generator = [f, clock](double s, double w, double u,
                                               double p) {
                    return f(clock.inverse(s), w, u, p);
                };
            }
            const std::vector<double> tg = uniform_grid(s0, s1, opts.nt + 1);
            const std::vector<double> xg =
                uniform_grid(-10.0 * std::sqrt(dv), 10.0 * std::sqrt(dv),
                             opts.nx);
            const Eigen::MatrixXd u =
                march_backward(problem, tg, xg, ParabolicOptions{});
            // Value at the left endpoint, w = 0 (center node by symmetry).
            std::vector<double> row(xg.size());
            for (std::size_t i = 0; i < xg.size(); ++i) row[i] = u(0, i);
            point.y_eps = Pchip(xg, row).value(0.0);
        }
        point.quotient = (point.y_eps - y) / dv;
        point.error = std::abs(point.quotient - sweep.target);
        sweep.points.push_back(point);
    }

    std::vector<double> le, lx;
    for (const auto& p : sweep.points)
        if (p.error > 1e-300) {
            le.push_back(std::log(p.error));
            lx.push_back(std::log(p.eps));
        }
    if (le.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < le.size(); ++i) {
            mx += lx[i];
            my += le[i];
        }
        mx /= le.size();
        my /= le.size();
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < le.size(); ++i) {
            sxx += (lx[i] - mx) * (lx[i] - mx);
            sxy += (lx[i] - mx) * (le[i] - my);
        }
        sweep.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    }
    return sweep;
}

}  // namespace fbsde
