#include "fbsde/mixed_pde.hpp"

#include <algorithm>
#include <cmath>

#include "fbsde/errors.hpp"
#include "fbsde/interp.hpp"
#include "fbsde/rng.hpp"

namespace fbsde {

bool NonlinearFbsdeSpec::validate_lipschitz(double box, bool enforce) const {
    if (!generator || lipschitz <= 0.0) return true;
    std::mt19937_64 gen = make_stream(20240601u, 7u);
    std::uniform_real_distribution<double> pick(-box, box);
    bool ok = true;
    for (int k = 0; k < 4000 && ok; ++k) {
        const double t = 0.5 * (pick(gen) / box + 1.0) * horizon;
        const double x = pick(gen);
        const double y1 = pick(gen), z1 = pick(gen);
        const double y2 = pick(gen), z2 = pick(gen);
        const double lhs = std::abs(generator(t, x, y1, z1) -
                                    generator(t, x, y2, z2));
        const double rhs =
            lipschitz * (std::abs(y1 - y2) + std::abs(z1 - z2)) + 1e-12;
        ok = lhs <= rhs;
    }
    if (!ok && enforce)
        throw ValidationError("generator exceeds declared Lipschitz constant");
    return ok;
}

PdeSolution solve_mixed_pde(const NonlinearFbsdeSpec& spec,
                            const PdeSolveOptions& opts) {
    spec.coeffs.validate_sigma(spec.horizon);
    spec.validate_lipschitz();
    const double T = spec.horizon;
    PdeSolution sol;
    sol.iota_table = IotaTable(spec.coeffs.sigma, T, spec.hurst,
                               opts.iota_samples);
    const double spread =
        opts.domain_width * std::sqrt(sol.iota_table.value(T));
    // Shift the box by the one-sided drift mass so advected mass stays inside.
    const RealFn bneg = [&](double s) { return std::min(spec.coeffs.b(s), 0.0); };
    const RealFn bpos = [&](double s) { return std::max(spec.coeffs.b(s), 0.0); };
    QuadOptions qopts;
    qopts.abs_tol = 1e-10;
    const double lo =
        spec.coeffs.eta0 + integrate(bneg, 0.0, T, qopts).value - spread;
    const double hi =
        spec.coeffs.eta0 + integrate(bpos, 0.0, T, qopts).value + spread;

    sol.t_grid = graded_time_grid(T, opts.nt, opts.time_grading);
    sol.x_grid = uniform_grid(lo, hi, opts.nx);
    sol.sigma_at_horizon = spec.coeffs.sigma(T);

    ParabolicProblem problem;
    const IotaTable& table = sol.iota_table;
    problem.diffusion = [&table](double t) {
        return 0.5 * std::max(table.derivative(t), 0.0);
    };
    problem.drift = [&spec](double t) { return spec.coeffs.b(t); };
    problem.terminal = spec.terminal.h;
    problem.generator = spec.generator;
    problem.zscale = [&spec](double t) { return spec.coeffs.sigma(t); };

    sol.u = march_backward(problem, sol.t_grid, sol.x_grid, opts.stepper,
                           &sol.stats);
    sol.ux = row_derivative(sol.u, sol.dx());
    sol.uxx = row_second_derivative(sol.u, sol.dx());
    return sol;
}

bool PdeSolution::contains(double t, double x) const {
    return t >= t_grid.front() - 1e-12 && t <= t_grid.back() + 1e-12 &&
           x >= x_grid.front() - 1e-12 && x <= x_grid.back() + 1e-12;
}

namespace {

struct TimeBracket {
    std::size_t j0, j1;
    double w1;  // weight of row j1
};

TimeBracket bracket_time(const std::vector<double>& t_grid, double t) {
    if (t < t_grid.front() - 1e-12 || t > t_grid.back() + 1e-12)
        throw DomainError("time outside the solved range");
    const double tc = std::clamp(t, t_grid.front(), t_grid.back());
    const auto it = std::upper_bound(t_grid.begin(), t_grid.end(), tc);
    std::size_t j1 = std::min<std::size_t>(it - t_grid.begin(),
                                           t_grid.size() - 1);
    if (j1 == 0) j1 = 1;
    const std::size_t j0 = j1 - 1;
    const double span = t_grid[j1] - t_grid[j0];
    return {j0, j1, span > 0.0 ? (tc - t_grid[j0]) / span : 0.0};
}

// Time-blended row values interpolated in x.
double interp_row(const std::vector<double>& x_grid, const Eigen::MatrixXd& m,
                  const TimeBracket& br, double x) {
    std::vector<double> blend(x_grid.size());
    for (std::size_t i = 0; i < x_grid.size(); ++i)
        blend[i] = (1.0 - br.w1) * m(br.j0, i) + br.w1 * m(br.j1, i);
    return Pchip(x_grid, blend).value(x);
}

}  // namespace

PdePoint evaluate_solution(const PdeSolution& sol, double t, double x) {
    if (!sol.contains(t, x))
        throw DomainError("evaluation point outside the solved box");
    const TimeBracket br = bracket_time(sol.t_grid, t);
    PdePoint out;
    out.u = interp_row(sol.x_grid, sol.u, br, x);
    out.ux = interp_row(sol.x_grid, sol.ux, br, x);
    out.uxx = interp_row(sol.x_grid, sol.uxx, br, x);
    return out;
}

double inverse_u(const PdeSolution& sol, double t, double y) {
    const TimeBracket br = bracket_time(sol.t_grid, t);
    const std::size_t n = sol.x_grid.size();
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i)
        row[i] = (1.0 - br.w1) * sol.u(br.j0, i) + br.w1 * sol.u(br.j1, i);
    for (std::size_t i = 1; i < n; ++i)
        if (!(row[i] > row[i - 1]))
            throw DomainError("u(t, .) is not strictly increasing");
    if (y < row.front() || y > row.back())
        throw DomainError("target value outside the range of u(t, .)");
    const Pchip interp(sol.x_grid, row);
    double lo = sol.x_grid.front(), hi = sol.x_grid.back();
    const double tol = 1e-10 * (1.0 + std::abs(y));
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double fx = interp.value(x) - y;
        if (std::abs(fx) <= tol) return x;
        if (fx > 0.0)
            hi = x;
        else
            lo = x;
        const double slope = interp.derivative(x);
        double next = (slope > 0.0) ? x - fx / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    if (std::abs(interp.value(x) - y) <= tol * 10.0) return x;
    throw DomainError("inversion of u(t, .) did not converge");
}

GrowthIndex fit_power_law(const std::vector<double>& absx,
                          const std::vector<double>& absv) {
    GrowthIndex out;
    std::vector<double> lx, lv;
    for (std::size_t i = 0; i < absx.size(); ++i)
        if (absx[i] > 1e-12 && absv[i] > 1e-300) {
            lx.push_back(std::log(absx[i]));
            lv.push_back(std::log(absv[i]));
        }
    const std::size_t n = lx.size();
    if (n < 5) {
        out.degenerate = true;
        return out;
    }
    double mx = 0.0, mv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        mv += lv[i];
    }
    mx /= n;
    mv /= n;
    double sxx = 0.0, sxv = 0.0, svv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxv += (lx[i] - mx) * (lv[i] - mv);
        svv += (lv[i] - mv) * (lv[i] - mv);
    }
    double value_range = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        value_range = std::max(value_range, std::abs(lv[i] - mv));
    if (sxx < 1e-12 || value_range < 1e-6) {
        out.degenerate = true;
        return out;
    }
    out.slope = sxv / sxx;
    const double rss = std::max(svv - out.slope * sxv, 0.0);
    out.std_error = std::sqrt(rss / (static_cast<double>(n - 2) * sxx));
    return out;
}

GrowthSummary growth_indices(const PdeSolution& sol, double t) {
    const TimeBracket br = bracket_time(sol.t_grid, t);
    const std::size_t n = sol.x_grid.size();
    const double xmax = std::max(std::abs(sol.x_grid.front()),
                                 std::abs(sol.x_grid.back()));
    const double cut = 0.8 * xmax;
    std::vector<double> ax, au, aux, ay, ainv;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = sol.x_grid[i];
        if (std::abs(x) < cut) continue;
        const double uval = (1.0 - br.w1) * sol.u(br.j0, i) + br.w1 * sol.u(br.j1, i);
        const double uxval =
            (1.0 - br.w1) * sol.ux(br.j0, i) + br.w1 * sol.ux(br.j1, i);
        ax.push_back(std::abs(x));
        au.push_back(std::abs(uval));
        aux.push_back(std::abs(uxval));
        // Inverse growth read off the same samples with roles swapped.
        ay.push_back(std::abs(uval));
        ainv.push_back(std::abs(x));
    }
    GrowthSummary out;
    out.u = fit_power_law(ax, au);
    out.ux = fit_power_law(ax, aux);
    out.u_inverse = fit_power_law(ay, ainv);
    return out;
}

MarginalDraws bsde_marginals(const PdeSolution& sol,
                             const NonlinearFbsdeSpec& spec, double t,
                             const FbmEnsemble& ensemble) {
    if (ensemble.kind != PathKind::WeightedIntegral)
        throw ValidationError("marginals need a weighted-integral ensemble");
    const std::size_t col = ensemble.column_of(t, 1e-9);
    const double shift = spec.coeffs.eta0 + spec.coeffs.b.integral(0.0, t);
    const double sig = spec.coeffs.sigma(t);
    const TimeBracket br = bracket_time(sol.t_grid, t);
    const std::size_t n = sol.x_grid.size();
    std::vector<double> urow(n), uxrow(n);
    for (std::size_t i = 0; i < n; ++i) {
        urow[i] = (1.0 - br.w1) * sol.u(br.j0, i) + br.w1 * sol.u(br.j1, i);
        uxrow[i] = (1.0 - br.w1) * sol.ux(br.j0, i) + br.w1 * sol.ux(br.j1, i);
    }
    const Pchip uint(sol.x_grid, urow), uxint(sol.x_grid, uxrow);

    MarginalDraws out;
    const std::size_t m = ensemble.paths.rows();
    out.y.resize(m);
    out.z.resize(m);
    const double lo = sol.x_grid.front(), hi = sol.x_grid.back();
    for (std::size_t p = 0; p < m; ++p) {
        double eta = shift + ensemble.paths(p, col);
        if (eta < lo || eta > hi) {
            eta = std::clamp(eta, lo, hi);
            ++out.clamped;
        }
        out.y[p] = uint.value(eta);
        out.z[p] = sig * uxint.value(eta);
    }
    if (out.clamped > m / 1000) {
        out.domain_warning = true;
        out.hint = "more than 0.1% of paths left the solved box; widen "
                   "domain_width and re-solve";
    }
    return out;
}

}  // namespace fbsde
