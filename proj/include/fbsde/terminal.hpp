#pragma once

#include <functional>
#include <string>

#include "fbsde/quadrature.hpp"

namespace fbsde {

// Terminal payoff with closed-form first and second derivatives.
struct TerminalMap {
    RealFn h;
    RealFn dh;
    RealFn d2h;
    std::string name;
    // Polynomial growth degree of h (used for domain sizing diagnostics).
    double growth_degree = 1.0;
};

// Built-in maps. softplus(a): log(1 + exp(a x)) / a, increasing, strictly
// convex, derivative in (0, 1). cubic(lin, cub): lin*x + cub*x^3, odd with
// polynomially growing slope. exp_scaled(a): exp(a x) (semigroup tests).
TerminalMap terminal_identity();
TerminalMap terminal_affine(double a0, double a1);
TerminalMap terminal_softplus(double a);
TerminalMap terminal_cubic(double lin, double cub);
TerminalMap terminal_exp(double a);

// Derivative range probed on [lo, hi]: {min h', max h', min h'', max h''}.
struct DerivativeBounds {
    double dh_min, dh_max, d2h_min, d2h_max;
};
DerivativeBounds probe_derivative_bounds(const TerminalMap& map, double lo,
                                         double hi, int probes = 1000);

}  // namespace fbsde
