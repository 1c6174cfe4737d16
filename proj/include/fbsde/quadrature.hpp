#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace fbsde {

using RealFn = std::function<double(double)>;

struct QuadOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_depth = 28;
    std::size_t max_panels = 4000;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;      // certified estimate, not a bound
    std::size_t panels = 0;  // panels accepted by the subdivision
};

// Adaptive Gauss-Kronrod 7-15 on [a, b]. Throws QuadratureError if the
// panel budget runs out before |error| <= max(abs_tol, rel_tol*|value|).
QuadResult integrate(const RealFn& f, double a, double b,
                     const QuadOptions& opts = {});

// Nodes/weights of the n-point Gauss-Legendre rule on [-1, 1].
// Cached per n; computed by Newton iteration on the Legendre recurrence.
const std::vector<double>& gauss_legendre_nodes(int n);
const std::vector<double>& gauss_legendre_weights(int n);

// Fixed-order Gauss-Legendre approximation of int_a^b f.
double gauss_legendre(const RealFn& f, double a, double b, int n);

// Nodes/weights of the n-point Gauss-Hermite rule for weight exp(-x^2)
// (Golub-Welsch on the Jacobi matrix). Cached per n.
struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const HermiteRule& gauss_hermite(int n);

// E[f(mean + scale * Z)], Z standard normal, by n-point Gauss-Hermite.
double hermite_expectation(const RealFn& f, double mean, double scale, int n);

// Same expectation with node doubling (start_n, 2*start_n, ...) until two
// successive estimates differ by less than rel_tol relatively (floor 1e-300
// on the denominator). Throws QuadratureError past max_n.
double hermite_expectation_adaptive(const RealFn& f, double mean, double scale,
                                    double rel_tol = 1e-8, int start_n = 64,
                                    int max_n = 1024);

}  // namespace fbsde
