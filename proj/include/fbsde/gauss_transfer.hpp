#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbsde/density.hpp"
#include "fbsde/interp.hpp"
#include "fbsde/parabolic.hpp"
#include "fbsde/terminal.hpp"

namespace fbsde {

// Strictly increasing variance clock V on [0, T] with V(0) = 0, either the
// closed form a * t^p or a sampled table. The clock turns a continuous
// Gaussian driver with Var X_t = V(t) into standard Brownian time.
class VarianceClock {
  public:
    VarianceClock() = default;  // linear clock on [0, 1]
    static VarianceClock power(double scale, double exponent, double T);
    static VarianceClock table(std::vector<double> t, std::vector<double> v);
    static VarianceClock linear(double T) { return power(1.0, 1.0, T); }

    double value(double t) const;
    // U(s) = inf{ r >= 0 : V(r) >= s }; round-trips to 1e-10.
    double inverse(double s) const;
    double horizon() const { return T_; }
    bool is_identity() const;
    std::string describe() const;

  private:
    bool is_power_ = true;
    double scale_ = 1.0, exponent_ = 1.0, T_ = 1.0;
    Pchip table_;
    void validate() const;
};

// How the generator depends on its derivative slot; the z-law requires at
// most linear dependence, z-bounds require none.
enum class ZDependence { None, Linear, Nonlinear };

struct GaussianDriverSpec {
    VarianceClock clock;
    TerminalMap terminal;
    GeneratorFn generator;  // f(t, x, y, z), t in original time; null = 0
    ZDependence z_dependence = ZDependence::None;
    std::string label = "gaussian-driver";
};

// Auxiliary solve on the clock: phi_s + (1/2) phi_xx + f(U(s), x, phi,
// phi_x) = 0 on [0, V(T)], phi(V(T), .) = h. The time-t law of
// y_t = phi(V(t), X_t) is the pushforward of N(0, V(t)).
struct TransferSolution {
    VarianceClock clock;
    PdeSolution surface;  // t_grid lives on the clock scale [0, V(T)]
};

struct TransferOptions {
    int nx = 400;
    int nt = 400;
    double domain_width = 8.0;  // half-width in units of sqrt(V(T))
    ParabolicOptions stepper;
};

TransferSolution solve_transferred(const GaussianDriverSpec& spec,
                                   const TransferOptions& opts = {});

// phi and phi_x at original time t and driver value x.
PdePoint transfer_point(const TransferSolution& sol, double t, double x);

// Draws of (y_t, z_t) = (phi, phi_x)(V(t), X_t), X_t ~ N(0, V(t)).
MarginalDraws transfer_marginals(const TransferSolution& sol, double t,
                                 std::size_t n, std::uint64_t seed);

// Gaussian-shape envelope around the time-t law:
//   lower = mu / (c2 V(t)) exp(-(x-m)^2 / (c1 V(t))),
//   upper = mu / (c1 V(t)) exp(-(x-m)^2 / (c2 V(t))),
// with 0 < c1 <= c2 calibrated from the pushforward's conditional variance
// on probe quantiles (head-room factor applied). Target Z demands a
// z-independent generator; the law itself also needs at most linear z.
struct TransferEnvelopeOptions {
    int probes = 101;
    double quantile_span = 3.0;
    double head_room = 1.05;
};
DensityEnvelope general_envelope(const TransferSolution& sol,
                                 const GaussianDriverSpec& spec, double t,
                                 Target target,
                                 const TransferEnvelopeOptions& opts = {});

// Small-interval representation check at (t, y, z): solves the auxiliary
// equation on [V(t), V(t+eps)] with affine terminal y + z * w and reports
//   e(eps) = | (y_eps - y) / (V(t+eps) - V(t)) - f(t, y, z) |.
// The left-endpoint value y_eps is deterministic, so the mean-square
// deviation reduces to this absolute value; estimator="mc" cross-checks it
// with a regression-based backward pass under common random numbers.
struct RepresentationPoint {
    double eps = 0.0;
    double clock_increment = 0.0;
    double y_eps = 0.0;
    double quotient = 0.0;
    double error = 0.0;
};
struct RepresentationSweep {
    std::vector<RepresentationPoint> points;
    double slope = 0.0;  // log error vs log eps regression slope
    double target = 0.0;  // f(t, y, z)
};
struct RepresentationOptions {
    std::string estimator = "pde";  // "pde" or "mc"
    std::size_t n_paths = 100000;   // mc estimator only
    std::uint64_t seed = 4242;
    int nx = 401;
    int nt = 128;
    int mc_steps = 64;
};
RepresentationSweep representation_check(const GaussianDriverSpec& spec,
                                         double t, double y, double z,
                                         const std::vector<double>& eps_list,
                                         const RepresentationOptions& opts = {});

}  // namespace fbsde
