#include "fbsde/heat_semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "fbsde/errors.hpp"
#include "fbsde/interp.hpp"
#include "fbsde/rng.hpp"

namespace fbsde {

double heat_kernel(double t, double x) {
    if (!(t > 0.0)) throw ValidationError("heat kernel needs t > 0");
    return std::exp(-0.5 * x * x / t) / std::sqrt(2.0 * M_PI * t);
}

double semigroup_apply(double t, const RealFn& g, double x, double rel_tol) {
    if (t < 0.0) throw ValidationError("semigroup time must be >= 0");
    if (t == 0.0) return g(x);
    return hermite_expectation_adaptive(g, x, std::sqrt(t), rel_tol);
}

bool LinearFbsdeSpec::validate(bool enforce) const {
    coeffs.validate_sigma(horizon);
    const double span = 6.0 * std::sqrt(iota_at(horizon));
    const double lo = coeffs.eta0 - span, hi = coeffs.eta0 + span;
    const int probes = 1000;
    bool ok = true;
    for (int i = 0; i < probes && ok; ++i) {
        const double x = lo + (hi - lo) * i / (probes - 1);
        const double d1 = terminal.dh(x), d2 = terminal.d2h(x);
        ok = d1 >= dh_lo - 1e-12 && d1 <= dh_hi + 1e-12 &&
             d2 >= d2h_lo - 1e-12 && d2 <= d2h_hi + 1e-12;
    }
    if (ok && check_convexity) ok = dh_lo > 0.0 && d2h_lo > 0.0;
    if (!ok && enforce)
        throw ValidationError(
            "terminal map violates declared derivative bounds on the probe grid");
    return ok;
}

void LinearFbsdeSpec::fit_bounds_from_probes() {
    const double span = 6.0 * std::sqrt(iota_at(horizon));
    const DerivativeBounds b = probe_derivative_bounds(
        terminal, coeffs.eta0 - span, coeffs.eta0 + span, 1000);
    dh_lo = b.dh_min;
    dh_hi = b.dh_max;
    d2h_lo = b.d2h_min;
    d2h_hi = b.d2h_max;
}

double LinearFbsdeSpec::iota_at(double t) const {
    return iota(coeffs.sigma, t, hurst);
}

namespace {

double beta_integral(const LinearFbsdeSpec& spec, double a, double b) {
    return spec.coeffs.beta.integral(a, b);
}

// int_t^T alpha_s exp(int_t^s beta) ds.
double alpha_term(const LinearFbsdeSpec& spec, double t) {
    if (spec.coeffs.alpha.is_constant() &&
        spec.coeffs.alpha.constant_value() == 0.0)
        return 0.0;
    const RealFn f = [&](double s) {
        return spec.coeffs.alpha(s) * std::exp(beta_integral(spec, t, s));
    };
    QuadOptions opts;
    opts.abs_tol = 1e-11;
    opts.rel_tol = 1e-11;
    return integrate(f, t, spec.horizon, opts).value;
}

// int_t^T sigma_s gamma_s ds.
double sigma_gamma_term(const LinearFbsdeSpec& spec, double t) {
    if (spec.coeffs.gamma.is_constant() &&
        spec.coeffs.gamma.constant_value() == 0.0)
        return 0.0;
    const RealFn f = [&](double s) {
        return spec.coeffs.sigma(s) * spec.coeffs.gamma(s);
    };
    QuadOptions opts;
    opts.abs_tol = 1e-12;
    opts.rel_tol = 1e-11;
    return integrate(f, t, spec.horizon, opts).value;
}

double shifted_argument(const LinearFbsdeSpec& spec, double t, double w) {
    return spec.coeffs.eta0 + spec.coeffs.b.integral(0.0, spec.horizon) -
           sigma_gamma_term(spec, t) + w;
}

}  // namespace

double quasi_conditional_expectation(const LinearFbsdeSpec& spec, const RealFn& g,
                                     double t, double w) {
    if (t < 0.0 || t > spec.horizon)
        throw ValidationError("time outside [0, horizon]");
    const double remaining = spec.iota_at(spec.horizon) - spec.iota_at(t);
    const double base =
        spec.coeffs.eta0 + spec.coeffs.b.integral(0.0, spec.horizon) + w;
    return semigroup_apply(std::max(remaining, 0.0), g, base);
}

LinearValue linear_solve(const LinearFbsdeSpec& spec, double t, double w) {
    if (t < 0.0 || t > spec.horizon)
        throw ValidationError("time outside [0, horizon]");
    const double remaining =
        std::max(spec.iota_at(spec.horizon) - spec.iota_at(t), 0.0);
    const double arg = shifted_argument(spec, t, w);
    const double growth = std::exp(beta_integral(spec, t, spec.horizon));
    LinearValue out;
    out.y = growth * semigroup_apply(remaining, spec.terminal.h, arg) +
            alpha_term(spec, t);
    out.z = -spec.coeffs.sigma(t) * growth *
            semigroup_apply(remaining, spec.terminal.dh, arg);
    return out;
}

namespace {

// y_t and z_t as functions of the realized integral w.
struct MarginalMaps {
    double iota_t;
    RealFn y_of_w;
    RealFn z_of_w;
};

MarginalMaps marginal_maps(const LinearFbsdeSpec& spec, double t) {
    MarginalMaps maps;
    maps.iota_t = spec.iota_at(t);
    const double remaining =
        std::max(spec.iota_at(spec.horizon) - maps.iota_t, 0.0);
    const double growth = std::exp(beta_integral(spec, t, spec.horizon));
    const double drift = alpha_term(spec, t);
    const double sig = spec.coeffs.sigma(t);
    const double base = shifted_argument(spec, t, 0.0);
    const TerminalMap term = spec.terminal;
    maps.y_of_w = [=](double w) {
        return growth * semigroup_apply(remaining, term.h, base + w) + drift;
    };
    maps.z_of_w = [=](double w) {
        return -sig * growth * semigroup_apply(remaining, term.dh, base + w);
    };
    return maps;
}

// E phi(W) against the N(0, v) density by quadrature over +-10 sd.
double gauss_integral(const RealFn& phi, double v) {
    const double sd = std::sqrt(v);
    const RealFn f = [&](double w) { return phi(w) * heat_kernel(v, w); };
    QuadOptions opts;
    opts.abs_tol = 1e-10;
    opts.rel_tol = 1e-9;
    return integrate(f, -10.0 * sd, 10.0 * sd, opts).value;
}

}  // namespace

MarginalStats linear_marginal_stats(const LinearFbsdeSpec& spec, double t,
                                    Target target) {
    const MarginalMaps maps = marginal_maps(spec, t);
    const RealFn& map = (target == Target::Y) ? maps.y_of_w : maps.z_of_w;
    MarginalStats stats;
    if (maps.iota_t <= 0.0) {
        stats.mean = map(0.0);
        stats.abs_moment = 0.0;
        return stats;
    }
    stats.mean = gauss_integral(map, maps.iota_t);
    // Split |map - mean| at its sign change (map is monotone when h' has one
    // sign); fall back to the unsplit integral otherwise.
    const double sd = std::sqrt(maps.iota_t);
    double lo = -10.0 * sd, hi = 10.0 * sd;
    double flo = map(lo) - stats.mean, fhi = map(hi) - stats.mean;
    const RealFn dev = [&](double w) {
        return std::abs(map(w) - stats.mean) * heat_kernel(maps.iota_t, w);
    };
    QuadOptions opts;
    opts.abs_tol = 1e-10;
    opts.rel_tol = 1e-9;
    if (flo * fhi < 0.0) {
        for (int it = 0; it < 200 && hi - lo > 1e-14 * sd; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fm = map(mid) - stats.mean;
            if (fm * flo <= 0.0) {
                hi = mid;
                fhi = fm;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        const double split = 0.5 * (lo + hi);
        stats.abs_moment = integrate(dev, -10.0 * sd, split, opts).value +
                           integrate(dev, split, 10.0 * sd, opts).value;
    } else {
        stats.abs_moment = integrate(dev, -10.0 * sd, 10.0 * sd, opts).value;
    }
    return stats;
}

LinearSamples sample_linear_marginals(const LinearFbsdeSpec& spec, double t,
                                      std::size_t n, std::uint64_t seed,
                                      int threads) {
    const MarginalMaps maps = marginal_maps(spec, t);
    const double sd = std::sqrt(std::max(maps.iota_t, 0.0));
    LinearSamples out;
    out.y.resize(n);
    out.z.resize(n);
    if (sd == 0.0) {
        std::fill(out.y.begin(), out.y.end(), maps.y_of_w(0.0));
        std::fill(out.z.begin(), out.z.end(), maps.z_of_w(0.0));
        return out;
    }
    // Tabulate the smooth maps once; per-sample evaluation is interpolation.
    const int nodes = 2049;
    std::vector<double> wg(nodes), yv(nodes), zv(nodes);
    for (int i = 0; i < nodes; ++i) {
        wg[i] = sd * (-10.0 + 20.0 * i / (nodes - 1));
        yv[i] = maps.y_of_w(wg[i]);
        zv[i] = maps.z_of_w(wg[i]);
    }
    const Pchip ytab(wg, yv), ztab(wg, zv);

    const std::size_t n_blocks = (n + kPathBlock - 1) / kPathBlock;
    auto fill = [&](std::size_t blk) {
        const std::size_t i0 = blk * kPathBlock;
        const std::size_t cnt = std::min(kPathBlock, n - i0);
        const std::vector<double> z = normal_block(seed, blk, cnt);
        for (std::size_t i = 0; i < cnt; ++i) {
            const double w = std::clamp(sd * z[i], wg.front(), wg.back());
            out.y[i0 + i] = ytab.value(w);
            out.z[i0 + i] = ztab.value(w);
        }
    };
    if (threads <= 1 || n_blocks <= 1) {
        for (std::size_t blk = 0; blk < n_blocks; ++blk) fill(blk);
    } else {
        std::vector<std::thread> pool;
        const int nt = std::min<std::size_t>(threads, n_blocks);
        for (int th = 0; th < nt; ++th)
            pool.emplace_back([&, th] {
                for (std::size_t blk = th; blk < n_blocks; blk += nt) fill(blk);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

}  // namespace fbsde
