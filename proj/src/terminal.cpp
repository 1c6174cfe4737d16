#include "fbsde/terminal.hpp"

#include <algorithm>
#include <cmath>

namespace fbsde {
namespace {

double softplus_stable(double u) {
    return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
}

double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

}  // namespace

TerminalMap terminal_identity() {
    return {[](double x) { return x; }, [](double) { return 1.0; },
            [](double) { return 0.0; }, "identity", 1.0};
}

TerminalMap terminal_affine(double a0, double a1) {
    return {[a0, a1](double x) { return a0 + a1 * x; },
            [a1](double) { return a1; }, [](double) { return 0.0; },
            "affine", 1.0};
}

TerminalMap terminal_softplus(double a) {
    return {[a](double x) { return softplus_stable(a * x) / a; },
            [a](double x) { return sigmoid(a * x); },
            [a](double x) {
                const double s = sigmoid(a * x);
                return a * s * (1.0 - s);
            },
            "softplus", 1.0};
}

TerminalMap terminal_cubic(double lin, double cub) {
    return {[lin, cub](double x) { return lin * x + cub * x * x * x; },
            [lin, cub](double x) { return lin + 3.0 * cub * x * x; },
            [cub](double x) { return 6.0 * cub * x; }, "cubic", 3.0};
}

TerminalMap terminal_exp(double a) {
    return {[a](double x) { return std::exp(a * x); },
            [a](double x) { return a * std::exp(a * x); },
            [a](double x) { return a * a * std::exp(a * x); }, "exp", 1.0};
}

DerivativeBounds probe_derivative_bounds(const TerminalMap& map, double lo,
                                         double hi, int probes) {
    DerivativeBounds b{map.dh(lo), map.dh(lo), map.d2h(lo), map.d2h(lo)};
    for (int i = 1; i < probes; ++i) {
        const double x = lo + (hi - lo) * i / (probes - 1);
        const double d1 = map.dh(x), d2 = map.d2h(x);
        b.dh_min = std::min(b.dh_min, d1);
        b.dh_max = std::max(b.dh_max, d1);
        b.d2h_min = std::min(b.d2h_min, d2);
        b.d2h_max = std::max(b.d2h_max, d2);
    }
    return b;
}

}  // namespace fbsde
