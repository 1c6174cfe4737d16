#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "fbsde/errors.hpp"
#include "fbsde/gauss_transfer.hpp"
#include "fbsde/heat_semigroup.hpp"
#include "fbsde/terminal.hpp"

using namespace fbsde;

namespace {

double normal_pdf(double x, double var) {
    return std::exp(-0.5 * x * x / var) /
           std::sqrt(2.0 * std::numbers::pi * var);
}

}  // namespace

TEST_CASE("power clocks evaluate and invert") {
    VarianceClock c = VarianceClock::power(2.0, 1.5, 1.0);
    CHECK(c.value(0.0) == 0.0);
    CHECK(c.value(1.0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(c.value(0.25) == doctest::Approx(2.0 * std::pow(0.25, 1.5)).epsilon(1e-14));
    CHECK(c.horizon() == 1.0);
    CHECK_FALSE(c.is_identity());
    for (double t : {0.1, 0.37, 0.8, 1.0}) {
        CHECK(c.inverse(c.value(t)) == doctest::Approx(t).epsilon(1e-9));
    }
    VarianceClock id = VarianceClock::linear(1.0);
    CHECK(id.is_identity());
    CHECK(id.value(0.42) == doctest::Approx(0.42).epsilon(1e-14));
    CHECK_THROWS_AS(c.value(1.5), ValidationError);
    CHECK_THROWS_AS(c.inverse(2.5), ValidationError);
    CHECK_THROWS_AS(VarianceClock::power(-1.0, 1.0, 1.0), ValidationError);
}

TEST_CASE("table clocks interpolate a sampled variance curve") {
    std::vector<double> t, v;
    for (int k = 0; k <= 100; ++k) {
        double tk = k / 100.0;
        t.push_back(tk);
        v.push_back(tk * tk);
    }
    VarianceClock c = VarianceClock::table(t, v);
    CHECK(c.value(0.35) == doctest::Approx(0.1225).epsilon(1e-5));
    for (double probe : {0.13, 0.5, 0.92}) {
        CHECK(c.inverse(c.value(probe)) == doctest::Approx(probe).epsilon(1e-8));
    }
    CHECK_FALSE(c.is_identity());
    CHECK(c.describe().find("table") != std::string::npos);

    CHECK_THROWS_AS(VarianceClock::table({0.0, 1.0}, {0.5, 1.0}),
                    ValidationError);  // must start at zero
    CHECK_THROWS_AS(VarianceClock::table({0.0, 0.5, 1.0}, {0.0, 0.4, 0.4}),
                    ValidationError);  // flat segment
    CHECK_THROWS_AS(VarianceClock::table({0.0, 0.5, 0.4}, {0.0, 0.2, 0.5}),
                    ValidationError);  // time not increasing
}

TEST_CASE("identity-clock transfer solves the plain backward heat flow") {
    GaussianDriverSpec spec;
    spec.clock = VarianceClock::linear(1.0);
    spec.terminal = terminal_softplus(1.0);
    TransferOptions opts;
    opts.nx = 300;
    opts.nt = 200;
    TransferSolution sol = solve_transferred(spec, opts);
    CHECK(sol.surface.t_grid.back() == doctest::Approx(1.0).epsilon(1e-12));

    for (double t : {0.0, 0.3, 0.7}) {
        for (double x : {-1.5, 0.0, 0.8}) {
            PdePoint p = transfer_point(sol, t, x);
            double want = semigroup_apply(1.0 - t, spec.terminal.h, x);
            double want_x = semigroup_apply(1.0 - t, spec.terminal.dh, x);
            CHECK(p.u == doctest::Approx(want).epsilon(1e-4));
            CHECK(p.ux == doctest::Approx(want_x).epsilon(1e-4));
        }
    }
    // terminal slice carries the payoff exactly at the grid nodes
    const double xnode = sol.surface.x_grid[120];
    PdePoint pT = transfer_point(sol, 1.0, xnode);
    CHECK(pT.u == doctest::Approx(spec.terminal.h(xnode)).epsilon(1e-12));
}

TEST_CASE("marginal draws follow the clock variance") {
    // identity payoff, no generator: y_t = X_t ~ N(0, V(t))
    GaussianDriverSpec spec;
    spec.clock = VarianceClock::power(1.0, 1.5, 1.0);
    spec.terminal = terminal_identity();
    TransferOptions opts;
    opts.nx = 200;
    opts.nt = 160;
    TransferSolution sol = solve_transferred(spec, opts);

    const double t = 0.5;
    const double V = std::pow(t, 1.5);
    MarginalDraws draws = transfer_marginals(sol, t, 50000, 321);
    REQUIRE(draws.y.size() == 50000);
    CHECK(draws.clamped == 0);
    double mean = 0.0, var = 0.0;
    for (double y : draws.y) mean += y;
    mean /= 50000.0;
    for (double y : draws.y) var += (y - mean) * (y - mean);
    var /= 49999.0;
    CHECK(std::abs(mean) < 4.0 * std::sqrt(V / 50000.0));
    CHECK(var == doctest::Approx(V).epsilon(0.05));

    // same seed reproduces the same draws
    MarginalDraws again = transfer_marginals(sol, t, 50000, 321);
    CHECK(draws.y == again.y);
}

TEST_CASE("small-interval representation against the affine closed form") {
    // f = a + b y + c z with a linear clock: the auxiliary problem stays
    // affine in space and reduces to a scalar linear ODE, so
    //   y_eps = e^{b d} y + a (e^{b d} - 1) / b + c z d e^{b d},  d = eps
    const double a = 0.3, b = 0.5, c = -0.2;
    GaussianDriverSpec spec;
    spec.clock = VarianceClock::linear(1.0);
    spec.terminal = terminal_softplus(1.0);  // unused by the check itself
    spec.generator = [&](double, double, double y, double z) {
        return a + b * y + c * z;
    };
    spec.z_dependence = ZDependence::Linear;

    const double t = 0.4, y = 0.7, z = -0.3;
    const std::vector<double> eps{0.2, 0.1, 0.05};
    RepresentationSweep sweep = representation_check(spec, t, y, z, eps);
    REQUIRE(sweep.points.size() == 3);
    CHECK(sweep.target == doctest::Approx(a + b * y + c * z).epsilon(1e-12));

    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double d = eps[i];
        const double ebd = std::exp(b * d);
        const double want = ebd * y + a * (ebd - 1.0) / b + c * z * d * ebd;
        CHECK(sweep.points[i].clock_increment == doctest::Approx(d).epsilon(1e-12));
        CHECK(sweep.points[i].y_eps == doctest::Approx(want).epsilon(1e-5));
        const double want_err =
            std::abs((want - y) / d - sweep.target);
        CHECK(sweep.points[i].error == doctest::Approx(want_err).epsilon(1e-3));
    }
    // the deviation is first order in the window length
    CHECK(sweep.slope == doctest::Approx(1.0).epsilon(0.12));
    CHECK(sweep.points[2].error < sweep.points[0].error);

    CHECK_THROWS_AS(representation_check(spec, t, y, z, {}), ValidationError);
    CHECK_THROWS_AS(representation_check(spec, t, y, z, {0.7}),
                    ValidationError);  // t + eps past the horizon
}

TEST_CASE("regression estimator agrees with the deterministic one") {
    const double a = 0.3, b = 0.5, c = -0.2;
    GaussianDriverSpec spec;
    spec.clock = VarianceClock::linear(1.0);
    spec.terminal = terminal_softplus(1.0);
    spec.generator = [&](double, double, double y, double z) {
        return a + b * y + c * z;
    };
    spec.z_dependence = ZDependence::Linear;

    const double t = 0.4, y = 0.7, z = -0.3;
    RepresentationOptions mc;
    mc.estimator = "mc";
    mc.n_paths = 60000;
    mc.mc_steps = 32;
    RepresentationSweep sim = representation_check(spec, t, y, z, {0.1}, mc);
    RepresentationSweep pde = representation_check(spec, t, y, z, {0.1});
    REQUIRE(sim.points.size() == 1);
    CHECK(std::abs(sim.points[0].y_eps - pde.points[0].y_eps) < 2e-3);

    // common random numbers: a second run is bit-identical
    RepresentationSweep rerun = representation_check(spec, t, y, z, {0.1}, mc);
    CHECK(sim.points[0].y_eps == rerun.points[0].y_eps);

    RepresentationOptions typo;
    typo.estimator = "exact";
    CHECK_THROWS_AS(representation_check(spec, t, y, z, {0.1}, typo),
                    ValidationError);
}

TEST_CASE("transfer envelope brackets the analytic pushforward density") {
    GaussianDriverSpec spec;
    spec.clock = VarianceClock::linear(1.0);
    spec.terminal = terminal_softplus(2.0);
    TransferOptions opts;
    opts.nx = 300;
    opts.nt = 200;
    // tight box keeps the derivative row well resolved in the tails
    opts.domain_width = 5.0;
    TransferSolution sol = solve_transferred(spec, opts);

    const double t = 0.5;
    const double V = 0.5;
    DensityEnvelope env_y = general_envelope(sol, spec, t, Target::Y);
    DensityEnvelope env_z = general_envelope(sol, spec, t, Target::Z);

    // y = phi(V, x) is increasing in x, so the exact law of y is the
    // pushforward of N(0, V): p(y(x)) = normal(x) / phi_x(x)
    const double sd = std::sqrt(V);
    for (int k = -8; k <= 8; ++k) {
        const double x = 0.25 * k * sd;
        PdePoint p = transfer_point(sol, t, x);
        const double py = normal_pdf(x, V) / p.ux;
        CHECK(env_y.lower(p.u) <= py * 1.002);
        CHECK(env_y.upper(p.u) >= py * 0.998);
        // z = phi_x(V, x) is increasing too (convex payoff): same argument
        const double pz = normal_pdf(x, V) / p.uxx;
        CHECK(env_z.lower(p.ux) <= pz * 1.002);
        CHECK(env_z.upper(p.ux) >= pz * 0.998);
    }

    GaussianDriverSpec wild = spec;
    wild.generator = [](double, double, double y, double z) {
        return std::sin(z) + y;
    };
    wild.z_dependence = ZDependence::Nonlinear;
    TransferSolution wild_sol = solve_transferred(wild, opts);
    CHECK_THROWS_AS(general_envelope(wild_sol, wild, t, Target::Z),
                    ValidationError);
}
