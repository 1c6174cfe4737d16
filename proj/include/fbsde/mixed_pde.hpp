#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "fbsde/coefficient.hpp"
#include "fbsde/fbm.hpp"
#include "fbsde/iota.hpp"
#include "fbsde/parabolic.hpp"
#include "fbsde/terminal.hpp"

namespace fbsde {

// Backward equation for y_t = u(t, eta_t), z_t = sigma_t u_x(t, eta_t) with
// eta_t = eta0 + int_0^t b + int_0^t sigma dB^H:
//   u_t + (1/2) iota'(t) u_xx + b(t) u_x + f(t, x, u, sigma_t u_x) = 0,
//   u(T, .) = h.
// Generator orientation: f enters the equation with a plus sign, so a
// driver-linear problem with dy = -(alpha + beta y + gamma z) dt - z dB^H
// corresponds to f = alpha + beta*y - gamma*z here and z_t = -z_linear.
struct NonlinearFbsdeSpec {
    CoefficientSet coeffs;
    TerminalMap terminal;
    GeneratorFn generator;           // null means f == 0
    double hurst = 0.75;
    double horizon = 1.0;
    double lipschitz = 0.0;          // declared (H1) constant, 0 = unchecked
    std::string generator_name = "none";

    // Spot-check |f(.,y1,z1) - f(.,y2,z2)| <= lipschitz * (|dy| + |dz|) on a
    // probe box; throws when violated and enforce is set.
    bool validate_lipschitz(double box = 5.0, bool enforce = true) const;
};

struct PdeSolveOptions {
    int nx = 400;
    int nt = 400;
    double domain_width = 8.0;   // half-width in units of sqrt(iota_T)
    double time_grading = 2.0;
    ParabolicOptions stepper;
    int iota_samples = 513;
};

// Dense solution surfaces with spatial derivatives and scheme diagnostics.
struct PdeSolution {
    std::vector<double> t_grid;  // ascending, t_grid.back() = horizon
    std::vector<double> x_grid;  // uniform ascending
    Eigen::MatrixXd u, ux, uxx;  // rows follow t_grid
    IotaTable iota_table;
    ParabolicStats stats;
    double sigma_at_horizon = 1.0;

    double dx() const { return x_grid[1] - x_grid[0]; }
    bool contains(double t, double x) const;
};

PdeSolution solve_mixed_pde(const NonlinearFbsdeSpec& spec,
                            const PdeSolveOptions& opts = {});

// Interpolated evaluation: shape-preserving cubic across x on the stored
// value/derivative rows, linear across t. Throws DomainError off-grid.
struct PdePoint {
    double u, ux, uxx;
};
PdePoint evaluate_solution(const PdeSolution& sol, double t, double x);

// x with u(t, x) = y to |u - y| <= 1e-10 (1 + |y|), bisection plus Newton
// polish. Requires u(t, .) strictly increasing across the grid row.
double inverse_u(const PdeSolution& sol, double t, double y);

// Log-log regression slopes of |u|, u_x and |u^{-1}| against |x| over the
// outer 20% of the domain (both tails pooled).
struct GrowthIndex {
    double slope = 0.0;
    double std_error = 0.0;
    bool degenerate = false;  // flat tails or too few usable probes
};
struct GrowthSummary {
    GrowthIndex u, ux, u_inverse;
};
GrowthSummary growth_indices(const PdeSolution& sol, double t);

// Least-squares slope of log(absv) against log(absx); degenerate when the
// probes are too few or the response is flat.
GrowthIndex fit_power_law(const std::vector<double>& absx,
                          const std::vector<double>& absv);

// Pathwise marginals y = u(t, eta_t), z = sigma_t u_x(t, eta_t) for an
// ensemble of realized weighted integrals. Escapes beyond the PDE domain
// are clamped and counted; above 0.1% the warning flag trips.
struct MarginalDraws {
    std::vector<double> y;
    std::vector<double> z;
    std::size_t clamped = 0;
    bool domain_warning = false;
    std::string hint;
};
MarginalDraws bsde_marginals(const PdeSolution& sol,
                             const NonlinearFbsdeSpec& spec, double t,
                             const FbmEnsemble& ensemble);

}  // namespace fbsde
