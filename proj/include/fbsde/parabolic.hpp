#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fbsde/quadrature.hpp"

namespace fbsde {

// Generator term F(t, x, u, u_x) added to the backward equation
//   u_t + D(t) u_xx + a(t) u_x + F(t, x, u, u_x) = 0,  u(t_end, .) given,
// marched from t_end down to t_begin.
using GeneratorFn = std::function<double(double, double, double, double)>;

struct ParabolicProblem {
    RealFn diffusion;          // D(t) >= 0
    RealFn drift;              // a(t)
    GeneratorFn generator;     // null means F == 0
    RealFn terminal;           // u at t_end
    // Scale fed to the generator's derivative slot: F receives
    // (t, x, u, zscale(t) * u_x). Identity scale when null.
    RealFn zscale;
};

struct ParabolicOptions {
    double theta = 0.5;          // implicit weight of the diffusion split
    double fp_tol = 1e-9;        // fixed-point residual per step
    int max_fp_iters = 20;
    double peclet_limit = 2.0;   // blend toward upwind past this cell Peclet
};

struct ParabolicStats {
    int max_fp_iters_used = 0;
    double max_step_residual = 0.0;
    long upwind_blend_steps = 0;  // steps where any node left pure central
};

// t ascending with t.front() = t_begin, t.back() = t_end; x uniform
// ascending. Returns u with row j = solution at t[j]. Boundary condition:
// vanishing second difference (linear extrapolation) at both ends.
Eigen::MatrixXd march_backward(const ParabolicProblem& problem,
                               const std::vector<double>& t,
                               const std::vector<double>& x,
                               const ParabolicOptions& opts,
                               ParabolicStats* stats = nullptr);

// Fourth-order interior first/second derivative along each row of u
// (second-order one-sided near and at the edges).
Eigen::MatrixXd row_derivative(const Eigen::MatrixXd& u, double dx);
Eigen::MatrixXd row_second_derivative(const Eigen::MatrixXd& u, double dx);

// Geometrically graded time grid on [0, T]: n+1 points, spacing shrinking
// toward 0 like (j/n)^power.
std::vector<double> graded_time_grid(double T, int n, double power = 2.0);

std::vector<double> uniform_grid(double lo, double hi, int n);

}  // namespace fbsde
