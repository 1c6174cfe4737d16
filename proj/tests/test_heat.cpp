#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fbsde/errors.hpp"
#include "fbsde/heat_semigroup.hpp"
#include "fbsde/iota.hpp"
#include "fbsde/quadrature.hpp"
#include "fbsde/terminal.hpp"

using namespace fbsde;

TEST_CASE("heat kernel normalization and scaling") {
    // p_1(0) = (2 pi)^{-1/2}
    CHECK(heat_kernel(1.0, 0.0) ==
          doctest::Approx(0.3989422804014327).epsilon(1e-15));
    // unit mass
    auto p = [](double x) { return heat_kernel(0.7, x); };
    CHECK(integrate(p, -12.0, 12.0).value == doctest::Approx(1.0).epsilon(1e-10));
    // p_t(x) = p_1(x / sqrt t) / sqrt t
    double t = 0.36, x = 0.5;
    CHECK(heat_kernel(t, x) ==
          doctest::Approx(heat_kernel(1.0, x / 0.6) / 0.6).epsilon(1e-14));
}

TEST_CASE("semigroup action on exponentials and polynomials") {
    // P_0 is the identity
    auto g = terminal_softplus(1.0).h;
    CHECK(semigroup_apply(0.0, g, 0.37) == g(0.37));
    // P_t e^x = e^{x + t/2}: at t = 0.9, x = 0 the value is e^{0.45}
    auto ex = [](double x) { return std::exp(x); };
    CHECK(semigroup_apply(0.9, ex, 0.0) ==
          doctest::Approx(1.5683121854901687).epsilon(1e-10));
    // affine functions are fixed points
    auto lin = [](double x) { return 2.0 * x - 1.0; };
    CHECK(semigroup_apply(0.8, lin, 1.3) == doctest::Approx(1.6).epsilon(1e-12));
    // P_t x^2 = x^2 + t
    auto sq = [](double x) { return x * x; };
    CHECK(semigroup_apply(0.6, sq, 1.1) ==
          doctest::Approx(1.81).epsilon(1e-11));
}

TEST_CASE("semigroup composes over time") {
    auto g = terminal_softplus(2.0).h;
    auto inner = [&](double y) { return semigroup_apply(0.2, g, y); };
    double composed = semigroup_apply(0.3, inner, 0.4);
    double direct = semigroup_apply(0.5, g, 0.4);
    CHECK(composed == doctest::Approx(direct).epsilon(1e-7));
}

TEST_CASE("driver variance for unit and scaled sigma") {
    // sigma = 1: iota(t) = t^{2H}
    CHECK(iota(Coefficient::constant(1.0), 0.7, 0.75) ==
          doctest::Approx(std::pow(0.7, 1.5)).epsilon(1e-7));
    // constant scaling enters squared
    CHECK(iota(Coefficient::constant(2.0), 0.7, 0.75) ==
          doctest::Approx(4.0 * std::pow(0.7, 1.5)).epsilon(1e-7));
    // sigma(s) = s at H = 3/4: the double integral collapses to 2/7
    CHECK(iota(Coefficient::polynomial({0.0, 1.0}), 1.0, 0.75) ==
          doctest::Approx(2.0 / 7.0).epsilon(1e-7));
    // vanishes at t = 0
    CHECK(iota(Coefficient::constant(1.0), 0.0, 0.75) == 0.0);
}

TEST_CASE("iota derivative matches the closed form and a finite difference") {
    // sigma = 1: iota'(t) = 2H t^{2H-1}
    CHECK(iota_derivative(Coefficient::constant(1.0), 0.5, 0.75) ==
          doctest::Approx(1.5 * std::sqrt(0.5)).epsilon(1e-7));
    Coefficient sig = Coefficient::polynomial({1.0, 0.25});
    const double t = 0.6, h = 1e-4, H = 0.8;
    double fd = (iota(sig, t + h, H) - iota(sig, t - h, H)) / (2.0 * h);
    CHECK(iota_derivative(sig, t, H) == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("tabulated iota agrees with direct quadrature") {
    Coefficient sig = Coefficient::polynomial({1.0, 0.25});
    IotaTable table(sig, 1.0, 0.75);
    for (double t : {0.13, 0.41, 0.77, 0.99}) {
        CHECK(table.value(t) == doctest::Approx(iota(sig, t, 0.75)).epsilon(1e-6));
        CHECK(table.derivative(t) ==
              doctest::Approx(iota_derivative(sig, t, 0.75)).epsilon(1e-5));
    }
    CHECK(table.horizon() == 1.0);
}

namespace {

LinearFbsdeSpec convex_spec() {
    LinearFbsdeSpec spec;
    spec.coeffs.b = Coefficient::constant(0.3);
    spec.coeffs.sigma = Coefficient::constant(1.0);
    spec.coeffs.eta0 = 0.2;
    spec.terminal = terminal_softplus(1.0);
    spec.hurst = 0.75;
    spec.horizon = 1.0;
    spec.fit_bounds_from_probes();
    return spec;
}

}  // namespace

TEST_CASE("derivative-bound hypothesis checking") {
    LinearFbsdeSpec spec = convex_spec();
    CHECK(spec.validate(true));
    CHECK(spec.dh_lo > 0.0);
    CHECK(spec.dh_hi < 1.0);
    CHECK(spec.d2h_lo > 0.0);

    // understate the slope ceiling: probes must trip the check
    LinearFbsdeSpec bad = spec;
    bad.dh_hi = 0.1;
    CHECK_FALSE(bad.validate(false));
    CHECK_THROWS_AS(bad.validate(true), ValidationError);

    // identity terminal has no curvature: convexity gate rejects it
    LinearFbsdeSpec flat = spec;
    flat.terminal = terminal_identity();
    flat.fit_bounds_from_probes();
    CHECK_FALSE(flat.validate(false));
    flat.check_convexity = false;
    CHECK(flat.validate(true));
}

TEST_CASE("conditional expectation surrogate on an exponential payoff") {
    LinearFbsdeSpec spec = convex_spec();
    // E-hat[e^{eta_T} | F_t](w) = exp(eta0 + int b + w + (iota_T - iota_t)/2)
    auto ex = [](double x) { return std::exp(x); };
    const double tau = 1.0 - std::pow(0.5, 1.5);
    CHECK(quasi_conditional_expectation(spec, ex, 0.5, 0.1) ==
          doctest::Approx(2.5173916468479064).epsilon(1e-9));
    CHECK(quasi_conditional_expectation(spec, ex, 0.5, 0.0) ==
          doctest::Approx(std::exp(0.5 + tau / 2.0)).epsilon(1e-9));
    // constant payoffs pass through untouched
    auto one = [](double) { return 1.0; };
    CHECK(quasi_conditional_expectation(spec, one, 0.3, -0.4) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("closed-form linear solution for an identity terminal") {
    LinearFbsdeSpec spec;
    spec.coeffs.b = Coefficient::constant(0.2);
    spec.coeffs.sigma = Coefficient::constant(1.5);
    spec.coeffs.alpha = Coefficient::constant(0.1);
    spec.coeffs.beta = Coefficient::constant(0.3);
    spec.coeffs.gamma = Coefficient::constant(0.25);
    spec.coeffs.eta0 = 0.5;
    spec.terminal = terminal_identity();
    spec.hurst = 0.75;
    spec.horizon = 1.0;

    const double t = 0.4, w = 0.37, tau = 0.6;
    // P maps the identity to itself, so every piece is elementary:
    //   arg = eta0 + int_0^T b - int_t^T sigma gamma + w
    //   y   = e^{beta tau} arg + alpha (e^{beta tau} - 1) / beta
    //   z   = -sigma e^{beta tau}
    const double ebt = std::exp(0.3 * tau);
    const double arg = 0.5 + 0.2 - 1.5 * 0.25 * tau + w;
    LinearValue v = linear_solve(spec, t, w);
    CHECK(v.y == doctest::Approx(ebt * arg + 0.1 * (ebt - 1.0) / 0.3)
                     .epsilon(1e-9));
    CHECK(v.z == doctest::Approx(-1.5 * ebt).epsilon(1e-9));

    // at the horizon the solution is the terminal value itself
    LinearValue vT = linear_solve(spec, 1.0, w);
    CHECK(vT.y == doctest::Approx(0.5 + 0.2 + w).epsilon(1e-10));
}

TEST_CASE("affine terminals stay affine through the solve") {
    LinearFbsdeSpec spec;
    spec.coeffs.sigma = Coefficient::constant(0.5);
    spec.coeffs.eta0 = -0.3;
    spec.terminal = terminal_affine(1.0, 2.0);
    spec.hurst = 0.8;
    spec.horizon = 1.0;
    // all of alpha, beta, gamma, b zero: y_t = h(eta0 + w), z_t = -sigma h'
    LinearValue v = linear_solve(spec, 0.25, 0.11);
    CHECK(v.y == doctest::Approx(1.0 + 2.0 * (-0.3 + 0.11)).epsilon(1e-10));
    CHECK(v.z == doctest::Approx(-0.5 * 2.0).epsilon(1e-10));
}

TEST_CASE("tower property across intermediate times") {
    LinearFbsdeSpec spec = convex_spec();
    // without alpha/beta/gamma the value is a martingale of the driver:
    // averaging y_t over w ~ N(0, iota_t) recovers y_0
    const double t = 0.5;
    const double sd = std::sqrt(spec.iota_at(t));
    auto yt = [&](double w) { return linear_solve(spec, t, w).y; };
    double averaged = hermite_expectation_adaptive(yt, 0.0, sd, 1e-9);
    double y0 = linear_solve(spec, 0.0, 0.0).y;
    CHECK(averaged == doctest::Approx(y0).epsilon(1e-7));
}

TEST_CASE("marginal statistics against the exact Gaussian law") {
    LinearFbsdeSpec spec;
    spec.coeffs.b = Coefficient::constant(0.1);
    spec.coeffs.sigma = Coefficient::constant(1.0);
    spec.coeffs.eta0 = 0.3;
    spec.terminal = terminal_identity();
    spec.check_convexity = false;
    spec.hurst = 0.75;
    spec.horizon = 1.0;
    spec.dh_lo = spec.dh_hi = 1.0;

    // identity terminal, trivial driver: y_t = 0.4 + w, w ~ N(0, t^{2H})
    const double t = 0.5;
    MarginalStats stats = linear_marginal_stats(spec, t, Target::Y);
    const double iota_t = std::pow(t, 1.5);
    CHECK(stats.mean == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(stats.abs_moment ==
          doctest::Approx(std::sqrt(2.0 * iota_t / std::acos(-1.0)))
              .epsilon(1e-8));

    // z = -sigma is deterministic here
    MarginalStats zstats = linear_marginal_stats(spec, t, Target::Z);
    CHECK(zstats.mean == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(zstats.abs_moment == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("sampled marginals agree with quadrature statistics") {
    LinearFbsdeSpec spec = convex_spec();
    const double t = 0.5;
    const std::size_t n = 40000;
    LinearSamples s = sample_linear_marginals(spec, t, n, 9);
    MarginalStats stats = linear_marginal_stats(spec, t, Target::Y);

    double mean = 0.0;
    for (double v : s.y) mean += v;
    mean /= double(n);
    double sd = 0.0;
    for (double v : s.y) sd += (v - mean) * (v - mean);
    sd = std::sqrt(sd / double(n - 1));
    CHECK(std::abs(mean - stats.mean) < 4.0 * sd / std::sqrt(double(n)));

    double abs_moment = 0.0;
    for (double v : s.y) abs_moment += std::abs(v - stats.mean);
    abs_moment /= double(n);
    CHECK(abs_moment == doctest::Approx(stats.abs_moment).epsilon(0.02));

    // thread-count independence, bit for bit
    LinearSamples s3 = sample_linear_marginals(spec, t, n, 9, 3);
    CHECK(s.y == s3.y);
    CHECK(s.z == s3.z);
}
