#include "fbsde/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fbsde/errors.hpp"
#include "fbsde/interp.hpp"

namespace fbsde {

double nv_density(const RealFn& g, double m, double mu, double x) {
    if (!(mu > 0.0)) throw ValidationError("nv_density needs mu > 0");
    const auto safe_g = [&](double u) {
        const double v = g(u);
        if (!(v > 0.0))
            throw DensityUndefinedError(
                "variance functional not strictly positive at u=" +
                std::to_string(u));
        return v;
    };
    const double centered = x - m;
    QuadOptions opts;
    opts.abs_tol = 1e-8;
    opts.rel_tol = 1e-8;
    const double expo =
        integrate([&](double u) { return u / safe_g(u); }, 0.0, centered, opts)
            .value;
    return mu / (2.0 * safe_g(centered)) * std::exp(-expo);
}

double chi(double z, double m, double lambda, double delta_bar) {
    const double p = lambda * delta_bar;
    if (!(p >= 0.0)) throw ValidationError("chi needs lambda*delta_bar >= 0");
    const auto phi1 = [p](double v) {
        return std::pow(std::abs(v), 2.0 * p + 2.0) / (2.0 * p + 2.0);
    };
    const auto phi2 = [p](double v) {
        const double s = (v > 0.0) ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        return s * std::pow(std::abs(v), 2.0 * p + 1.0) / (2.0 * p + 1.0);
    };
    const double d = z - m;
    return 0.5 * d * d + (phi1(z) - phi1(m)) - m * (phi2(z) - phi2(m));
}

void GrowthIndices::validate() const {
    if (!(eps_bar > 0.0 && delta_bar > 0.0 && lambda > 0.0 && L > 0.0 &&
          C_upper > 0.0 && C_lower > 0.0))
        throw ValidationError("growth indices must all be strictly positive");
}

namespace {

double poly_q1(const GrowthIndices& idx, double iota, double x) {
    const double e = idx.eps_bar * idx.delta_bar;
    const double a = std::pow(std::abs(x), e);
    return (1.0 + a) * (1.0 + a + std::pow(iota, 0.5 * idx.eps_bar));
}

double poly_q2(const GrowthIndices& idx, double x) {
    return 1.0 + std::pow(std::abs(x), 2.0 * idx.lambda * idx.delta_bar);
}

}  // namespace

EnvelopePair nongaussian_envelope(const GrowthIndices& idx, double m, double mu,
                                  double iota, double x) {
    idx.validate();
    if (!(iota > 0.0) || !(mu > 0.0))
        throw ValidationError("envelope needs positive iota and mu");
    // Sandwich compatibility of the constants at this point.
    if (idx.C_lower * iota / poly_q2(idx, x) >
        idx.C_upper * iota * poly_q1(idx, iota, x) * (1.0 + 1e-12))
        throw ValidationError("envelope constants are not sandwich-compatible");
    QuadOptions opts;
    opts.abs_tol = 1e-9;
    opts.rel_tol = 1e-8;
    const double J =
        integrate([&](double u) { return u / poly_q1(idx, iota, u + m); }, 0.0,
                  x - m, opts)
            .value;
    EnvelopePair out;
    out.lower = mu / (2.0 * idx.C_upper * iota * poly_q1(idx, iota, x)) *
                std::exp(-chi(x, m, idx.lambda, idx.delta_bar) /
                         (idx.C_lower * iota));
    out.upper = mu * poly_q2(idx, x) / (2.0 * idx.C_lower * iota) *
                std::exp(-J / (idx.C_upper * iota));
    if (out.lower > out.upper * (1.0 + 1e-9))
        throw ValidationError("envelope ordering violated");
    return out;
}

double corollary_upper(const GrowthIndices& idx, double m, double mu,
                       double iota, double z0, double x) {
    idx.validate();
    if (!idx.corollary_enabled())
        throw ValidationError("far-tail curve needs eps_bar*delta_bar < 1");
    if (!(std::abs(x) > z0))
        throw DomainError("far-tail curve only valid for |x| > z0");
    const double r = 1.0 - idx.eps_bar * idx.delta_bar;
    const double sgn = (x >= 0.0) ? 1.0 : -1.0;
    const double lead = std::pow(std::abs(x - m), 2.0 * r);
    const double anchor = std::pow(std::abs(sgn * z0 - m), 2.0 * r);
    const double expo = (lead - anchor) / (4.0 * r * idx.C_upper * iota);
    return mu * poly_q2(idx, x) / (2.0 * idx.C_lower * iota) * std::exp(-expo);
}

double find_z0(const GrowthIndices& idx, double m, double iota, double cap) {
    idx.validate();
    const double e2 = 2.0 * idx.eps_bar * idx.delta_bar;
    const auto quad_dominates = [&](double u) {
        return poly_q1(idx, iota, u + m) <= 2.0 * std::pow(std::abs(u), e2);
    };
    const double start = std::max(std::abs(m) * 1.01, 1e-3);
    std::vector<double> ladder;
    for (double z = start; z <= cap; z *= 1.01) ladder.push_back(z);
    if (ladder.empty())
        throw DomainError("threshold scan range is empty");
    // Suffix scan: keep the smallest rung from which the bound never fails.
    std::vector<bool> ok(ladder.size());
    for (std::size_t k = 0; k < ladder.size(); ++k)
        ok[k] = quad_dominates(ladder[k] - m) && quad_dominates(-ladder[k] - m);
    std::size_t first_good = ladder.size();
    for (std::size_t k = ladder.size(); k-- > 0;) {
        if (!ok[k]) break;
        first_good = k;
    }
    if (first_good == ladder.size())
        throw DomainError("no dominance threshold found below cap " +
                          std::to_string(cap));
    return ladder[first_good];
}

TailPair tail_bound(double a1, double a2, double x) {
    if (!(a1 >= 0.0) || !(a2 > 0.0) || !(x > 0.0))
        throw ValidationError("tail bound needs a1 >= 0, a2 > 0, x > 0");
    TailPair out;
    out.up = std::exp(-x * x / (2.0 * a1 * x + 2.0 * a2));
    out.down = std::exp(-x * x / (2.0 * a2));
    return out;
}

LinearTails corollary_tails(const LinearFbsdeSpec& spec, double t, double x) {
    if (!(x > 0.0)) throw ValidationError("tail offset must be positive");
    const double it = spec.iota_at(t);
    const double sup_beta = spec.coeffs.beta.max_on(0.0, spec.horizon);
    const double theta2 = it * std::exp(2.0 * (spec.horizon - t) * sup_beta);
    const double sig = spec.coeffs.sigma(t);
    LinearTails out;
    out.a2_y = spec.dh_hi * spec.dh_hi * theta2;
    out.a2_z = spec.d2h_hi * spec.d2h_hi * theta2 * sig * sig;
    out.y = tail_bound(0.0, out.a2_y, x);
    out.z = tail_bound(0.0, out.a2_z, x);
    return out;
}

DensityEnvelope gaussian_envelope(const LinearFbsdeSpec& spec, double t,
                                  Target target, double mu) {
    if (!(mu > 0.0)) throw ValidationError("envelope needs mu > 0");
    const double it = spec.iota_at(t);
    if (!(it > 0.0)) throw ValidationError("degenerate marginal at t = 0");
    const double gap = spec.horizon - t;
    const double theta1 =
        it * std::exp(2.0 * gap * spec.coeffs.beta.min_on(0.0, spec.horizon));
    const double theta2 =
        it * std::exp(2.0 * gap * spec.coeffs.beta.max_on(0.0, spec.horizon));
    double lo_slope, hi_slope, scale;
    if (target == Target::Y) {
        lo_slope = spec.dh_lo;
        hi_slope = spec.dh_hi;
        scale = 1.0;
    } else {
        lo_slope = spec.d2h_lo;
        hi_slope = spec.d2h_hi;
        const double sig = spec.coeffs.sigma(t);
        scale = sig * sig;
    }
    if (!(lo_slope > 0.0 && hi_slope >= lo_slope))
        throw ValidationError("declared derivative bounds must be positive");
    const double v_lo = lo_slope * lo_slope * theta1 * scale;
    const double v_hi = hi_slope * hi_slope * theta2 * scale;
    const double m = linear_marginal_stats(spec, t, target).mean;
    DensityEnvelope env;
    env.kind = EnvelopeKind::Gaussian;
    env.m = m;
    env.mu = mu;
    env.lower = [m, mu, v_lo, v_hi](double x) {
        const double d = x - m;
        return mu / (2.0 * v_hi) * std::exp(-0.5 * d * d / v_lo);
    };
    env.upper = [m, mu, v_lo, v_hi](double x) {
        const double d = x - m;
        return mu / (2.0 * v_lo) * std::exp(-0.5 * d * d / v_hi);
    };
    env.tail_up = [v_hi](double x) { return std::exp(-0.5 * x * x / v_hi); };
    env.tail_down = env.tail_up;
    return env;
}

namespace {

// Row view of the relevant map at fixed t: M (value) and M' (derivative),
// interpolated in x, argument clamped to the solved box.
struct MapRow {
    Pchip value;
    Pchip slope;
    double lo, hi;
    double at(double x) const { return value.value(std::clamp(x, lo, hi)); }
    double slope_at(double x) const {
        return slope.value(std::clamp(x, lo, hi));
    }
};

MapRow map_row(const PdeSolution& sol, double t, Target target,
               double sigma_t) {
    const std::size_t n = sol.x_grid.size();
    // Blend the two bracketing time rows linearly.
    std::size_t j1 = std::upper_bound(sol.t_grid.begin(), sol.t_grid.end(),
                                      std::clamp(t, sol.t_grid.front(),
                                                 sol.t_grid.back())) -
                     sol.t_grid.begin();
    j1 = std::clamp<std::size_t>(j1, 1, sol.t_grid.size() - 1);
    const std::size_t j0 = j1 - 1;
    const double span = sol.t_grid[j1] - sol.t_grid[j0];
    const double w1 = span > 0.0 ? (t - sol.t_grid[j0]) / span : 0.0;
    std::vector<double> value(n), slope(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (1.0 - w1) * sol.u(j0, i) + w1 * sol.u(j1, i);
        const double ux = (1.0 - w1) * sol.ux(j0, i) + w1 * sol.ux(j1, i);
        const double uxx = (1.0 - w1) * sol.uxx(j0, i) + w1 * sol.uxx(j1, i);
        if (target == Target::Y) {
            value[i] = u;
            slope[i] = ux;
        } else {
            value[i] = sigma_t * ux;
            slope[i] = sigma_t * uxx;
        }
    }
    // The boundary rows are linear extrapolations, so the slope row ties
    // bit-exactly at the edges.  Drop exact-duplicate edge nodes; interior
    // ties still fail the strict scan in invert_map.
    std::size_t lo_i = 0, hi_i = n - 1;
    while (lo_i + 1 < hi_i && value[lo_i + 1] == value[lo_i]) ++lo_i;
    while (hi_i > lo_i + 1 && value[hi_i - 1] == value[hi_i]) --hi_i;
    if (hi_i - lo_i + 1 < 4)
        throw DomainError("map row is not strictly monotone");
    std::vector<double> xs(sol.x_grid.begin() + long(lo_i),
                           sol.x_grid.begin() + long(hi_i) + 1);
    std::vector<double> vs(value.begin() + long(lo_i),
                           value.begin() + long(hi_i) + 1);
    std::vector<double> ss(slope.begin() + long(lo_i),
                           slope.begin() + long(hi_i) + 1);
    return {Pchip(xs, vs), Pchip(xs, ss), xs.front(), xs.back()};
}

double invert_map(const MapRow& row, double target) {
    const auto& y = row.value.values();
    const bool increasing = y.back() > y.front();
    for (std::size_t i = 1; i < y.size(); ++i)
        if (increasing ? !(y[i] > y[i - 1]) : !(y[i] < y[i - 1]))
            throw DomainError("map row is not strictly monotone");
    const double ylo = std::min(y.front(), y.back());
    const double yhi = std::max(y.front(), y.back());
    if (target < ylo || target > yhi)
        throw DomainError("value outside the range of the map row");
    double lo = row.lo, hi = row.hi;
    const double tol = 1e-10 * (1.0 + std::abs(target));
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double fx = row.value.value(x) - target;
        if (std::abs(fx) <= tol) return x;
        if ((fx > 0.0) == increasing)
            hi = x;
        else
            lo = x;
        const double d = row.value.derivative(x);
        double next = (std::abs(d) > 1e-300) ? x - fx / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double g_from_surface(const PdeSolution& sol, double t_row, double variance,
                      double base, double sigma_t, double y, double m,
                      Target target) {
    if (!(variance > 0.0))
        throw ValidationError("degenerate marginal: zero driver variance");
    const MapRow row = map_row(sol, t_row, target, sigma_t);
    const double xstar = invert_map(row, y + m);
    const double sd = std::sqrt(variance);
    const RealFn inner = [&](double r) {
        return hermite_expectation(
            [&](double z) {
                return row.slope_at(r * xstar + (1.0 - r) * base +
                                    std::sqrt(1.0 - r * r) * z);
            },
            0.0, sd, 96);
    };
    QuadOptions opts;
    opts.abs_tol = 1e-9;
    opts.rel_tol = 1e-6;
    const double mixed = integrate(inner, 0.0, 1.0, opts).value;
    const double g = variance * row.slope_at(xstar) * mixed;
    if (!(g > 0.0))
        throw DensityUndefinedError("conditional variance came out nonpositive");
    return g;
}

double g_explicit(const PdeSolution& sol, const NonlinearFbsdeSpec& spec,
                  double t, double y, double m, Target target) {
    const double it = iota(spec.coeffs.sigma, t, spec.hurst);
    const double base = spec.coeffs.eta0 + spec.coeffs.b.integral(0.0, t);
    return g_from_surface(sol, t, it, base, spec.coeffs.sigma(t), y, m, target);
}

Calibration calibrate_envelope(const PdeSolution& sol,
                               const NonlinearFbsdeSpec& spec, double t,
                               Target target, const CalibrationOptions& opts) {
    Calibration cal;
    const double it = iota(spec.coeffs.sigma, t, spec.hurst);
    const double sig = spec.coeffs.sigma(t);
    cal.iota_scale = it;
    const MapRow row = map_row(sol, t, target, sig);
    const double base = spec.coeffs.eta0 + spec.coeffs.b.integral(0.0, t);
    const double sd = std::sqrt(it);

    // Marginal mean over w ~ N(0, iota_t).
    cal.m = hermite_expectation([&](double w) { return row.at(base + w); }, 0.0,
                                sd, 128);
    const double mean = cal.m;
    cal.mu = hermite_expectation(
        [&](double w) { return std::abs(row.at(base + w) - mean); }, 0.0, sd,
        512);

    // Tail exponents of the map: slope growth, inverse growth.
    const double cut =
        0.8 * std::max(std::abs(row.lo), std::abs(row.hi));
    std::vector<double> ax, aslope, av, ainv;
    const auto& xs = row.value.nodes();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (std::abs(xs[i]) < cut) continue;
        ax.push_back(std::abs(xs[i]));
        aslope.push_back(std::abs(row.slope.values()[i]));
        av.push_back(std::abs(row.value.values()[i]));
        ainv.push_back(std::abs(xs[i]));
    }
    const GrowthIndex slope_idx = fit_power_law(ax, aslope);
    const GrowthIndex inv_idx = fit_power_law(av, ainv);

    GrowthIndices idx;
    idx.eps_bar =
        std::max(slope_idx.degenerate ? 0.0 : slope_idx.slope, 0.0) + opts.eps;
    idx.delta_bar =
        std::max(inv_idx.degenerate ? 0.0 : inv_idx.slope, 0.0) + opts.delta;
    idx.lambda =
        std::max(slope_idx.degenerate ? 0.0 : -slope_idx.slope, 0.0) +
        opts.delta;
    // L from the smallest slope-decay constant on the full row.
    double Lfit = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double s = std::abs(row.slope.values()[i]);
        if (s > 1e-300)
            Lfit = std::max(
                Lfit, 1.0 / (s * (1.0 + std::pow(std::abs(xs[i]), idx.lambda))));
    }
    idx.L = std::max(Lfit, 1e-6);

    // Probes on marginal quantile points; g sampled there.
    cal.probe_points.resize(opts.probes);
    cal.g_values.resize(opts.probes);
    double c_up = 0.0, c_lo = std::numeric_limits<double>::infinity();
    for (int k = 0; k < opts.probes; ++k) {
        const double w = sd * opts.quantile_span *
                         (2.0 * k / (opts.probes - 1.0) - 1.0);
        const double value = row.at(base + w) - mean;
        cal.probe_points[k] = value;
        const double g = g_explicit(sol, spec, t, value, mean, target);
        cal.g_values[k] = g;
        const double uncentered = value + mean;
        c_up = std::max(c_up, g / (it * poly_q1(idx, it, uncentered)));
        c_lo = std::min(c_lo, g * poly_q2(idx, uncentered) / it);
    }
    idx.C_upper = c_up * opts.head_room;
    idx.C_lower = c_lo / opts.head_room;
    idx.validate();
    cal.indices = idx;
    return cal;
}

DensityEnvelope polynomial_envelope(const Calibration& cal) {
    DensityEnvelope env;
    env.kind = EnvelopeKind::Polynomial;
    env.m = cal.m;
    env.mu = cal.mu;
    const GrowthIndices idx = cal.indices;
    const double m = cal.m, mu = cal.mu, iota = cal.iota_scale;
    env.lower = [idx, m, mu, iota](double x) {
        return nongaussian_envelope(idx, m, mu, iota, x).lower;
    };
    env.upper = [idx, m, mu, iota](double x) {
        return nongaussian_envelope(idx, m, mu, iota, x).upper;
    };
    // Linear majorant of g over the probes feeds the concentration bounds.
    double base = 0.0;
    for (std::size_t i = 0; i < cal.probe_points.size(); ++i)
        if (std::abs(cal.probe_points[i]) <=
            0.25 * std::abs(cal.probe_points.back()))
            base = std::max(base, cal.g_values[i]);
    if (base == 0.0 && !cal.g_values.empty())
        base = *std::max_element(cal.g_values.begin(), cal.g_values.end());
    double a1 = 0.0;
    for (std::size_t i = 0; i < cal.probe_points.size(); ++i) {
        const double v = cal.probe_points[i];
        if (v > 1e-12)
            a1 = std::max(a1, (cal.g_values[i] - base) / v);
    }
    double a2 = base;
    for (std::size_t i = 0; i < cal.probe_points.size(); ++i)
        a2 = std::max(a2, cal.g_values[i] - a1 * cal.probe_points[i]);
    env.tail_up = [a1, a2](double x) { return tail_bound(a1, a2, x).up; };
    env.tail_down = [a1, a2](double x) { return tail_bound(a1, a2, x).down; };
    return env;
}

double EmpiricalDensity::local_se(std::size_t i) const {
    const double rk = 0.5 / std::sqrt(M_PI);
    return std::sqrt(std::max(values[i], 0.0) * rk /
                     (static_cast<double>(count) * bandwidth));
}

EmpiricalDensity kde(const std::vector<double>& samples, int grid_points,
                     double bandwidth_override) {
    if (samples.size() < 2) throw ValidationError("kde needs >= 2 samples");
    EmpiricalDensity out;
    out.count = samples.size();
    const double n = static_cast<double>(samples.size());
    out.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double var = 0.0;
    for (double s : samples) var += (s - out.mean) * (s - out.mean);
    var /= (n - 1.0);
    const double sd = std::sqrt(var);
    for (double s : samples) out.abs_moment += std::abs(s - out.mean);
    out.abs_moment /= n;

    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    const double q1 = sorted[static_cast<std::size_t>(0.25 * (n - 1))];
    const double q3 = sorted[static_cast<std::size_t>(0.75 * (n - 1))];
    const double iqr = q3 - q1;
    double spread = std::min(sd, iqr > 0.0 ? iqr / 1.34 : sd);
    if (!(spread > 0.0)) throw ValidationError("degenerate sample spread");
    out.bandwidth = bandwidth_override > 0.0
                        ? bandwidth_override
                        : 0.9 * spread * std::pow(n, -0.2);

    const double h = out.bandwidth;
    const double lo = sorted.front() - 4.0 * h;
    const double hi = sorted.back() + 4.0 * h;
    out.grid = uniform_grid(lo, hi, grid_points);
    // Binned evaluation: bin width well under the bandwidth keeps the
    // approximation error far below sampling noise.
    const int bins = std::max(4096, grid_points * 8);
    std::vector<double> count(bins, 0.0);
    const double bw = (hi - lo) / bins;
    for (double s : samples) {
        int b = static_cast<int>((s - lo) / bw);
        b = std::clamp(b, 0, bins - 1);
        count[b] += 1.0;
    }
    out.values.assign(grid_points, 0.0);
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * M_PI));
    const double cutoff = 8.0 * h;
    for (int gpt = 0; gpt < grid_points; ++gpt) {
        const double x = out.grid[gpt];
        double acc = 0.0;
        const int b_lo = std::max(0, static_cast<int>((x - cutoff - lo) / bw));
        const int b_hi =
            std::min(bins - 1, static_cast<int>((x + cutoff - lo) / bw));
        for (int b = b_lo; b <= b_hi; ++b) {
            if (count[b] == 0.0) continue;
            const double d = (x - (lo + (b + 0.5) * bw)) / h;
            acc += count[b] * std::exp(-0.5 * d * d);
        }
        out.values[gpt] = acc * norm;
    }
    return out;
}

TailPair empirical_tails(const std::vector<double>& samples, double m,
                         double x) {
    if (!(x > 0.0)) throw ValidationError("tail offset must be positive");
    std::size_t up = 0, down = 0;
    for (double s : samples) {
        if (s - m >= x) ++up;
        if (s - m <= -x) ++down;
    }
    TailPair out;
    out.up = static_cast<double>(up) / samples.size();
    out.down = static_cast<double>(down) / samples.size();
    return out;
}

EnvelopeCheck verify_envelope(const EmpiricalDensity& emp,
                              const DensityEnvelope& env, double region_lo,
                              double region_hi, double slack) {
    EnvelopeCheck check;
    // Central 98% of the estimated mass, by the trapezoid CDF of the KDE.
    std::vector<double> cdf(emp.grid.size(), 0.0);
    for (std::size_t i = 1; i < emp.grid.size(); ++i)
        cdf[i] = cdf[i - 1] + 0.5 * (emp.values[i] + emp.values[i - 1]) *
                                  (emp.grid[i] - emp.grid[i - 1]);
    const double total = cdf.back();
    for (std::size_t i = 0; i < emp.grid.size(); ++i) {
        const double x = emp.grid[i];
        if (x < region_lo || x > region_hi) continue;
        const double q = total > 0.0 ? cdf[i] / total : 0.5;
        if (q < 0.01 || q > 0.99) continue;
        const double lo = env.lower(x);
        const double hi = env.upper(x);
        const double se = emp.local_se(i);
        const double est = emp.values[i];
        const bool ok = est >= lo - slack * se && est <= hi + slack * se;
        check.x.push_back(x);
        check.lower.push_back(lo);
        check.upper.push_back(hi);
        check.estimate.push_back(est);
        check.se.push_back(se);
        check.ok.push_back(ok);
        ++check.points;
        if (ok) ++check.passed;
    }
    check.fraction =
        check.points ? static_cast<double>(check.passed) / check.points : 1.0;
    return check;
}

}  // namespace fbsde
