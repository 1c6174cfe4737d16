#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fbsde/heat_semigroup.hpp"
#include "fbsde/mixed_pde.hpp"

namespace fbsde {

// Density of a centered functional F with conditional-variance functional g:
//   rho(x) = mu / (2 g(x - m)) * exp(-int_0^{x-m} u / g(u) du),
// m = E F, mu = E|F - m|. Throws DensityUndefinedError when g is not
// strictly positive along the integration path.
double nv_density(const RealFn& g, double m, double mu, double x);

// Closed form of int_0^{z-m} u (1 + |u + m|^{2p}) du with p = lambda *
// delta_bar (the exponent inside the polynomial-growth lower envelope).
double chi(double z, double m, double lambda, double delta_bar);

// Growth-index bundle behind the polynomial envelopes. The constants are
// calibration outputs (probe fits), not literature values; for derivative
// targets they absorb the sigma_t^2 scale so one evaluator serves both.
struct GrowthIndices {
    double eps_bar = 0.0;    // tail growth of the forward slope
    double delta_bar = 0.0;  // tail growth of the inverse map
    double lambda = 0.0;     // decay exponent of the slope lower bound
    double L = 1.0;          // constant of that lower bound
    double C_upper = 1.0;    // g <= C_upper * iota * poly terms
    double C_lower = 1.0;    // g >= C_lower * iota / (1 + |.|^{2 lambda db})
    void validate() const;   // positivity, and the shape products finite
    bool corollary_enabled() const { return eps_bar * delta_bar < 1.0; }
};

struct EnvelopePair {
    double lower = 0.0;
    double upper = 0.0;
};

// Polynomial-growth envelope around the density of a driver functional with
// variance scale `iota` (pass sigma_t^2-scaled indices for derivative
// targets):
//   lower(x) = mu / (2 C_up iota q1(x)) * exp(-chi(x, m) / (C_lo iota))
//   upper(x) = mu q2(x) / (2 C_lo iota) * exp(-J(x) / (C_up iota)),
// q1(x) = (1+|x|^{eb db})(1+|x|^{eb db}+iota^{eb/2}), q2(x) = 1+|x|^{2 l db},
// J(x) = int_0^{x-m} u du / q1(u + m). Checks lower <= upper when the
// constants are sandwich-compatible; flags a non-integrable upper shape.
EnvelopePair nongaussian_envelope(const GrowthIndices& idx, double m, double mu,
                                  double iota, double x);

// Far-tail upper curve valid for |x| > z0 (needs eps_bar * delta_bar < 1):
// replaces J by its closed-form far-field minorant anchored at z0.
double corollary_upper(const GrowthIndices& idx, double m, double mu,
                       double iota, double z0, double x);

// Smallest geometric-grid threshold above |m| past which the quadratic
// far-field minorant q1(u + m) <= 2 |u|^{2 eb db} holds on both tails.
double find_z0(const GrowthIndices& idx, double m, double iota,
               double cap = 1e6);

// Concentration bounds exp(-x^2/(2 a1 x + 2 a2)) (upper tail) and
// exp(-x^2/(2 a2)) (lower tail) for x > 0.
struct TailPair {
    double up = 0.0;
    double down = 0.0;
};
TailPair tail_bound(double a1, double a2, double x);

// Both targets' tail bounds for the driver-linear problem: variance proxies
// theta2 = iota_t e^{2 (T-t) sup beta} scaled by the declared slope bounds.
struct LinearTails {
    TailPair y;
    TailPair z;
    double a2_y = 0.0, a2_z = 0.0;
};
LinearTails corollary_tails(const LinearFbsdeSpec& spec, double t, double x);

enum class EnvelopeKind { Gaussian, Polynomial, Generic };

// Evaluable two-sided envelope with its tail curves.
struct DensityEnvelope {
    EnvelopeKind kind = EnvelopeKind::Generic;
    double m = 0.0;
    double mu = 0.0;
    std::function<double(double)> lower;  // of the outcome value x
    std::function<double(double)> upper;
    std::function<double(double)> tail_up;    // of the centered excess x > 0
    std::function<double(double)> tail_down;
};

// Two-sided Gaussian envelope for the driver-linear problem,
//   theta1 = iota_t e^{2 (T-t) inf beta},  theta2 = iota_t e^{2 (T-t) sup beta}:
//   lower = mu/(2 C^2 theta2) exp(-(x-m)^2/(2 c^2 theta1)),
//   upper = mu/(2 c^2 theta1) exp(-(x-m)^2/(2 C^2 theta2)),
// with (c, C) the declared slope bounds (curvature bounds for target Z).
DensityEnvelope gaussian_envelope(const LinearFbsdeSpec& spec, double t,
                                  Target target, double mu);

// Conditional-variance functional of y_t (or z_t) computed from the solved
// surface: g(y) = S u'(t, xstar) int_0^1 E[u'(t, r xstar + (1-r) base +
// sqrt(1-r^2) Z)] dr with Z ~ N(0, iota_t), xstar the preimage of y + m,
// u' = u_x and S = iota_t for target Y; u' = sigma_t u_x with its own
// preimage and S = sigma_t^2 iota_t for target Z.
double g_explicit(const PdeSolution& sol, const NonlinearFbsdeSpec& spec,
                  double t, double y, double m, Target target = Target::Y);

// Same functional with the driver data passed explicitly: `t_row` addresses
// the surface's own time grid, `variance` is the driver variance at that
// time, `base` the deterministic center of the driver position.
double g_from_surface(const PdeSolution& sol, double t_row, double variance,
                      double base, double sigma_t, double y, double m,
                      Target target);

// Probe-fit of GrowthIndices for the solved nonlinear problem: exponents
// from tail regressions (plus margins eps, delta), constants from the
// smallest values making the g sandwich hold on `probes` quantile points
// (times a safety head-room factor).
struct CalibrationOptions {
    double eps = 0.05;
    double delta = 0.05;
    int probes = 101;
    double quantile_span = 3.0;  // probe range in sd units of the marginal
    double head_room = 1.05;
};
struct Calibration {
    GrowthIndices indices;
    double m = 0.0;
    double mu = 0.0;
    double iota_scale = 0.0;  // iota_t (target Y) or sigma^2 iota_t (target Z)
    std::vector<double> probe_points;  // centered probe values
    std::vector<double> g_values;
};
Calibration calibrate_envelope(const PdeSolution& sol,
                               const NonlinearFbsdeSpec& spec, double t,
                               Target target = Target::Y,
                               const CalibrationOptions& opts = {});

DensityEnvelope polynomial_envelope(const Calibration& cal);

// Gaussian-kernel density estimate, Silverman bandwidth
// 0.9 min(sd, iqr/1.34) n^{-1/5}, grid spanning the samples +- 4 bandwidths.
struct EmpiricalDensity {
    std::size_t count = 0;
    double bandwidth = 0.0;
    double mean = 0.0;
    double abs_moment = 0.0;
    std::vector<double> grid;
    std::vector<double> values;
    // Pointwise sampling noise sqrt(f R(K) / (n h)), R(Gaussian) = 1/(2 sqrt pi).
    double local_se(std::size_t i) const;
};
EmpiricalDensity kde(const std::vector<double>& samples, int grid_points = 512,
                     double bandwidth_override = 0.0);

// Fraction of empirical tail mass beyond m +- x.
TailPair empirical_tails(const std::vector<double>& samples, double m, double x);

// Envelope-vs-estimate comparison on the estimate's grid restricted to
// [region_lo, region_hi] and to the central 98% of the sample mass:
// pass iff lower - slack*se <= kde <= upper + slack*se.
struct EnvelopeCheck {
    std::size_t points = 0;
    std::size_t passed = 0;
    double fraction = 0.0;
    std::vector<double> x, lower, upper, estimate, se;
    std::vector<bool> ok;
};
EnvelopeCheck verify_envelope(const EmpiricalDensity& emp,
                              const DensityEnvelope& env, double region_lo,
                              double region_hi, double slack);

}  // namespace fbsde
