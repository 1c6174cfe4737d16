#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "fbsde/density.hpp"
#include "fbsde/errors.hpp"
#include "fbsde/rng.hpp"
#include "fbsde/terminal.hpp"

using namespace fbsde;

namespace {

double normal_pdf(double x, double m, double var) {
    const double d = x - m;
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

TEST_CASE("density formula on reference variance functionals") {
    // g(u) = 1 + u^2, m = 0, mu = 1 at x = 1:
    // rho = 1/4 * exp(-(1/2) log 2) = sqrt(2)/8
    auto g = [](double u) { return 1.0 + u * u; };
    CHECK(nv_density(g, 0.0, 1.0, 1.0) ==
          doctest::Approx(0.17677669529663687).epsilon(1e-12));

    // constant g = s^2 with mu = s sqrt(2/pi) reproduces the exact
    // N(m, s^2) density
    const double s2 = 0.49, m = 0.3;
    const double mu = std::sqrt(2.0 * s2 / std::numbers::pi);
    auto gc = [&](double) { return s2; };
    for (double x : {-1.2, 0.0, 0.3, 0.9, 2.5}) {
        CHECK(nv_density(gc, m, mu, x) ==
              doctest::Approx(normal_pdf(x, m, s2)).epsilon(1e-10));
    }
}

TEST_CASE("density formula rejects a vanishing variance functional") {
    auto g = [](double u) { return 1.0 - u * u; };  // zero at |u| = 1
    CHECK_NOTHROW(nv_density(g, 0.0, 1.0, 0.5));
    CHECK_THROWS_AS(nv_density(g, 0.0, 1.0, 2.0), DensityUndefinedError);
    CHECK_THROWS_AS(nv_density(g, 0.0, 1.0, -2.0), DensityUndefinedError);
}

TEST_CASE("polynomial-weight integral matches quadrature") {
    // chi(z, m) = int_0^{z-m} u (1 + |u + m|^{2 lambda delta}) du
    const double lambda = 1.2, delta = 0.5;
    auto direct = [&](double z, double m) {
        auto f = [&](double u) {
            return u * (1.0 + std::pow(std::abs(u + m), 2.0 * lambda * delta));
        };
        return integrate(f, 0.0, z - m).value;
    };
    CHECK(chi(2.3, 0.4, lambda, delta) ==
          doctest::Approx(direct(2.3, 0.4)).epsilon(1e-9));
    CHECK(chi(-1.5, 0.4, lambda, delta) ==
          doctest::Approx(direct(-1.5, 0.4)).epsilon(1e-9));
    CHECK(chi(-2.0, -0.7, lambda, delta) ==
          doctest::Approx(direct(-2.0, -0.7)).epsilon(1e-9));
    // centered case collapses to d^2/2 + |d|^{2p+2}/(2p+2)
    const double p = lambda * delta, d = 1.7;
    const double closed = d * d / 2.0 + std::pow(d, 2.0 * p + 2.0) / (2.0 * p + 2.0);
    CHECK(chi(d, 0.0, lambda, delta) == doctest::Approx(closed).epsilon(1e-12));
    CHECK(chi(-d, 0.0, lambda, delta) == doctest::Approx(closed).epsilon(1e-12));
    // chi(m, m) = 0
    CHECK(chi(0.4, 0.4, lambda, delta) == 0.0);
}

TEST_CASE("growth-index validation") {
    GrowthIndices idx{0.5, 0.8, 1.0, 1.0, 2.0, 0.5};
    CHECK_NOTHROW(idx.validate());
    CHECK(idx.corollary_enabled());  // product 0.4 < 1
    GrowthIndices wide = idx;
    wide.eps_bar = 2.0;
    CHECK_FALSE(wide.corollary_enabled());  // product 1.6
    GrowthIndices bad = idx;
    bad.lambda = 0.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    bad = idx;
    bad.C_lower = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("polynomial envelope pair is ordered and throws when incompatible") {
    GrowthIndices idx;
    idx.eps_bar = 0.5;
    idx.delta_bar = 0.5;
    idx.lambda = 1.0;
    idx.L = 1.0;
    idx.C_upper = 2.0;
    idx.C_lower = 0.5;
    const double m = 0.1, mu = 0.8, iota = 0.6;
    for (int k = -8; k <= 8; ++k) {
        EnvelopePair pair = nongaussian_envelope(idx, m, mu, iota, 0.5 * k);
        CHECK(pair.lower >= 0.0);
        CHECK(pair.lower <= pair.upper);
    }
    GrowthIndices clash = idx;
    clash.C_lower = 10.0;
    clash.C_upper = 0.1;
    CHECK_THROWS_AS(nongaussian_envelope(clash, m, mu, iota, 0.0),
                    ValidationError);
}

TEST_CASE("far-field threshold is the smallest working rung") {
    GrowthIndices idx;
    idx.eps_bar = 0.6;
    idx.delta_bar = 0.5;  // eps*delta = 0.3 < 1: far-tail curve available
    idx.lambda = 1.0;
    idx.L = 1.0;
    idx.C_upper = 1.5;
    idx.C_lower = 0.5;
    const double m = 0.3, iota = 0.5;
    const double z0 = find_z0(idx, m, iota);
    CHECK(z0 > std::abs(m));

    const double e2 = 2.0 * idx.eps_bar * idx.delta_bar;
    auto q1 = [&](double x) {
        double a = std::pow(std::abs(x), idx.eps_bar * idx.delta_bar);
        return (1.0 + a) * (1.0 + a + std::pow(iota, 0.5 * idx.eps_bar));
    };
    auto dominated = [&](double z) {
        return q1(z) <= 2.0 * std::pow(std::abs(z - m), e2) &&
               q1(-z) <= 2.0 * std::pow(std::abs(-z - m), e2);
    };
    // holds at the threshold and beyond
    CHECK(dominated(z0));
    CHECK(dominated(2.0 * z0));
    CHECK(dominated(10.0 * z0));
    // one geometric rung below, some tail still fails
    CHECK_FALSE(dominated(z0 / 1.01));
}

TEST_CASE("far-tail curve dominates the plain upper envelope") {
    GrowthIndices idx;
    idx.eps_bar = 0.6;
    idx.delta_bar = 0.5;
    idx.lambda = 1.0;
    idx.L = 1.0;
    idx.C_upper = 1.5;
    idx.C_lower = 0.5;
    const double m = 0.3, mu = 0.8, iota = 0.5;
    const double z0 = find_z0(idx, m, iota);
    for (double x : {1.2 * z0, 2.0 * z0, -1.5 * z0, -4.0 * z0}) {
        double far = corollary_upper(idx, m, mu, iota, z0, x);
        double plain = nongaussian_envelope(idx, m, mu, iota, x).upper;
        CHECK(far >= plain * (1.0 - 1e-9));
    }
    CHECK_THROWS_AS(corollary_upper(idx, m, mu, iota, z0, 0.5 * z0),
                    DomainError);
    GrowthIndices heavy = idx;
    heavy.eps_bar = 2.0;
    heavy.delta_bar = 0.8;  // product above 1 disables the curve
    CHECK_THROWS_AS(corollary_upper(heavy, m, mu, iota, z0, 2.0 * z0),
                    ValidationError);
}

TEST_CASE("concentration bounds: shape and monotonicity") {
    TailPair t1 = tail_bound(0.5, 1.0, 2.0);
    CHECK(t1.up == doctest::Approx(std::exp(-4.0 / (2.0 + 2.0))).epsilon(1e-14));
    CHECK(t1.down == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    // the linear term in the denominator can only weaken the upper bound
    CHECK(t1.up >= t1.down);
    // a1 = 0 collapses both to the same Gaussian bound
    TailPair t0 = tail_bound(0.0, 1.0, 2.0);
    CHECK(t0.up == t0.down);
    // decreasing in x
    CHECK(tail_bound(0.5, 1.0, 3.0).up < t1.up);
    CHECK(tail_bound(0.5, 1.0, 3.0).down < t1.down);
    CHECK_THROWS_AS(tail_bound(-0.1, 1.0, 1.0), ValidationError);
    CHECK_THROWS_AS(tail_bound(0.0, 0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(tail_bound(0.0, 1.0, 0.0), ValidationError);
}

namespace {

LinearFbsdeSpec affine_linear_spec() {
    LinearFbsdeSpec spec;
    spec.coeffs.b = Coefficient::constant(0.1);
    spec.coeffs.sigma = Coefficient::constant(0.5);
    spec.coeffs.alpha = Coefficient::constant(0.3);
    spec.coeffs.beta = Coefficient::constant(0.2);
    spec.coeffs.gamma = Coefficient::constant(0.15);
    spec.coeffs.eta0 = -0.2;
    spec.terminal = terminal_affine(0.3, 2.0);
    spec.hurst = 0.75;
    spec.horizon = 1.0;
    spec.dh_lo = spec.dh_hi = 2.0;
    spec.check_convexity = false;
    return spec;
}

}  // namespace

TEST_CASE("Gaussian envelope collapses to the exact law for affine terminals") {
    // constant beta and constant terminal slope make theta1 = theta2 and
    // c = C, so lower = upper = the true Gaussian marginal density
    LinearFbsdeSpec spec = affine_linear_spec();
    const double t = 0.5;
    MarginalStats stats = linear_marginal_stats(spec, t, Target::Y);
    DensityEnvelope env = gaussian_envelope(spec, t, Target::Y, stats.abs_moment);

    const double var = 4.0 * spec.iota_at(t) * std::exp(0.2);
    CHECK(env.m == doctest::Approx(stats.mean).epsilon(1e-10));
    const double sd = std::sqrt(var);
    for (int k = -3; k <= 3; ++k) {
        const double x = env.m + k * sd;
        const double exact = normal_pdf(x, env.m, var);
        CHECK(env.lower(x) == doctest::Approx(exact).epsilon(1e-7));
        CHECK(env.upper(x) == doctest::Approx(exact).epsilon(1e-7));
    }
    // matching tail curves, Gaussian on both sides
    CHECK(env.tail_up(sd) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
    CHECK(env.tail_down(sd) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));

    // a flat terminal has no curvature: the Z envelope must refuse
    CHECK_THROWS_AS(gaussian_envelope(spec, t, Target::Z, stats.abs_moment),
                    ValidationError);
}

TEST_CASE("tail scales of the driver-linear problem") {
    LinearFbsdeSpec spec = affine_linear_spec();
    spec.d2h_lo = 0.0;
    spec.d2h_hi = 0.1;  // pretend curvature ceiling, for the Z scale only
    const double t = 0.5;
    LinearTails tails = corollary_tails(spec, t, 1.0);
    const double theta2 = spec.iota_at(t) * std::exp(0.2);
    CHECK(tails.a2_y == doctest::Approx(4.0 * theta2).epsilon(1e-10));
    CHECK(tails.a2_z ==
          doctest::Approx(0.01 * theta2 * 0.25).epsilon(1e-10));
    CHECK(tails.y.up == doctest::Approx(std::exp(-0.5 / tails.a2_y)).epsilon(1e-12));
    CHECK(tails.y.up <= 1.0);
    CHECK_THROWS_AS(corollary_tails(spec, t, -1.0), ValidationError);
}

TEST_CASE("kernel density estimate approximates a known law") {
    auto samples = normal_block(314, 5, 100000);
    EmpiricalDensity emp = kde(samples);
    CHECK(emp.count == samples.size());
    CHECK(std::abs(emp.mean) < 0.02);
    CHECK(emp.abs_moment ==
          doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(0.02));
    double worst = 0.0;
    for (std::size_t i = 0; i < emp.grid.size(); ++i) {
        if (std::abs(emp.grid[i]) > 3.0) continue;
        worst = std::max(worst,
                         std::abs(emp.values[i] - normal_pdf(emp.grid[i], 0.0, 1.0)));
        CHECK(emp.local_se(i) > 0.0);
    }
    CHECK(worst < 0.02);
}

TEST_CASE("estimate error shrinks at the kernel rate") {
    // integrated squared error against the true density falls like n^{-4/5}
    std::vector<std::size_t> counts{2000, 8000, 32000, 128000};
    std::vector<double> log_n, log_ise;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        std::vector<double> all = normal_block(2024, k, counts[k]);
        EmpiricalDensity emp = kde(all);
        double ise = 0.0;
        for (std::size_t i = 1; i < emp.grid.size(); ++i) {
            const double dx = emp.grid[i] - emp.grid[i - 1];
            const double a = emp.values[i - 1] - normal_pdf(emp.grid[i - 1], 0, 1);
            const double b = emp.values[i] - normal_pdf(emp.grid[i], 0, 1);
            ise += 0.5 * (a * a + b * b) * dx;
        }
        log_n.push_back(std::log(double(counts[k])));
        log_ise.push_back(std::log(ise));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(log_n.size());
    for (std::size_t i = 0; i < log_n.size(); ++i) {
        sx += log_n[i];
        sy += log_ise[i];
        sxx += log_n[i] * log_n[i];
        sxy += log_n[i] * log_ise[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope < -0.5);
    CHECK(slope > -1.15);
}

TEST_CASE("empirical tail mass on a handmade sample") {
    std::vector<double> s{-3.0, -1.0, 0.0, 1.0, 3.0};
    TailPair t = empirical_tails(s, 0.0, 1.5);
    CHECK(t.up == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(t.down == doctest::Approx(0.2).epsilon(1e-14));
    TailPair inner = empirical_tails(s, 0.0, 0.5);
    CHECK(inner.up == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(inner.down == doctest::Approx(0.4).epsilon(1e-14));
    // off-center
    TailPair shifted = empirical_tails(s, 0.5, 1.0);
    CHECK(shifted.up == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(shifted.down == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("variance functional is exactly iota for unit-slope surfaces") {
    // identity terminal with no generator keeps u_x = 1 everywhere, so
    // g(y) = iota_t * u_x * int E[u_x] dr = iota_t for every y
    NonlinearFbsdeSpec spec;
    spec.coeffs.b = Coefficient::constant(0.1);
    spec.coeffs.sigma = Coefficient::constant(1.0);
    spec.coeffs.eta0 = 0.3;
    spec.terminal = terminal_identity();
    spec.hurst = 0.75;
    spec.horizon = 1.0;
    PdeSolveOptions opts;
    opts.nx = 200;
    opts.nt = 120;
    PdeSolution sol = solve_mixed_pde(spec, opts);

    const double t = 0.5, m = 0.4;  // mean of y_t = 0.4 + w
    const double iota_t = std::pow(t, 1.5);
    for (double yc : {-0.5, 0.0, 0.8}) {
        CHECK(g_explicit(sol, spec, t, yc, m, Target::Y) ==
              doctest::Approx(iota_t).epsilon(1e-6));
    }

    // an affine terminal of slope 2 scales the functional by 4
    NonlinearFbsdeSpec affine = spec;
    affine.terminal = terminal_affine(0.3, 2.0);
    PdeSolution sol2 = solve_mixed_pde(affine, opts);
    const double m2 = 0.3 + 2.0 * 0.4;
    CHECK(g_explicit(sol2, affine, t, 0.5, m2, Target::Y) ==
          doctest::Approx(4.0 * iota_t).epsilon(1e-6));
}

TEST_CASE("calibrated polynomial envelope brackets the probe functional") {
    NonlinearFbsdeSpec spec;
    spec.coeffs.sigma = Coefficient::constant(1.0);
    spec.coeffs.eta0 = 0.2;
    spec.terminal = terminal_cubic(1.0, 1.0 / 3.0);
    spec.generator = [](double, double, double y, double z) {
        return 0.5 * std::tanh(y) + 0.25 * std::sin(z);
    };
    spec.lipschitz = 0.5;
    spec.hurst = 0.75;
    spec.horizon = 1.0;
    PdeSolveOptions opts;
    opts.nx = 240;
    opts.nt = 160;
    PdeSolution sol = solve_mixed_pde(spec, opts);

    Calibration cal = calibrate_envelope(sol, spec, 0.5, Target::Y);
    CHECK_NOTHROW(cal.indices.validate());
    CHECK(cal.iota_scale == doctest::Approx(std::pow(0.5, 1.5)).epsilon(1e-6));
    REQUIRE(cal.probe_points.size() == cal.g_values.size());
    REQUIRE(cal.probe_points.size() >= 50);

    // the fitted constants must sandwich every probed g value
    const double S = cal.iota_scale;
    for (std::size_t i = 0; i < cal.probe_points.size(); ++i) {
        const double x = cal.probe_points[i];
        const double a = std::pow(std::abs(x),
                                  cal.indices.eps_bar * cal.indices.delta_bar);
        const double q1 = (1.0 + a) * (1.0 + a + std::pow(S, 0.5 * cal.indices.eps_bar));
        const double q2 =
            1.0 + std::pow(std::abs(x),
                           2.0 * cal.indices.lambda * cal.indices.delta_bar);
        CHECK(cal.g_values[i] > 0.0);
        CHECK(cal.g_values[i] <= cal.indices.C_upper * S * q1 * (1.0 + 1e-9));
        CHECK(cal.g_values[i] >= cal.indices.C_lower * S / q2 * (1.0 - 1e-9));
    }

    // and the assembled envelope stays ordered on a wider probe set
    DensityEnvelope env = polynomial_envelope(cal);
    CHECK(env.kind == EnvelopeKind::Polynomial);
    for (int k = -10; k <= 10; ++k) {
        const double x = cal.m + 0.4 * k;
        CHECK(env.lower(x) <= env.upper(x) * (1.0 + 1e-9));
        CHECK(env.lower(x) >= 0.0);
    }
}

TEST_CASE("envelope verification separates valid from broken bands") {
    auto samples = normal_block(99, 1, 20000);
    EmpiricalDensity emp = kde(samples);
    const double mu = std::sqrt(2.0 / std::numbers::pi);

    DensityEnvelope exact;
    exact.m = 0.0;
    exact.mu = mu;
    exact.lower = [](double x) { return normal_pdf(x, 0.0, 1.0); };
    exact.upper = [](double x) { return normal_pdf(x, 0.0, 1.0); };
    EnvelopeCheck good = verify_envelope(emp, exact, -2.0, 2.0, 3.0);
    CHECK(good.points > 50);
    CHECK(good.fraction >= 0.95);
    REQUIRE(good.x.size() == good.points);
    REQUIRE(good.ok.size() == good.points);

    DensityEnvelope broken = exact;
    broken.upper = [](double x) { return 0.5 * normal_pdf(x, 0.0, 1.0); };
    EnvelopeCheck bad = verify_envelope(emp, broken, -2.0, 2.0, 3.0);
    CHECK(bad.fraction < 0.6);
}
