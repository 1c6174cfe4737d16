#include "fbsde/iota.hpp"

#include <cmath>

#include "fbsde/errors.hpp"
#include "fbsde/quadrature.hpp"

namespace fbsde {
namespace {

void check_args(double t, double H) {
    if (!(H > 0.5 && H < 1.0))
        throw ValidationError("iota requires H in (1/2, 1)");
    if (t < 0.0) throw ValidationError("iota requires t >= 0");
}

// F(u) = int_0^u sigma(v) (u-v)^{2H-2} dv, desingularized by
// w = (u-v)^{2H-1} (transformed integrand is C^1 at w = 0).
double singular_factor(const Coefficient& sigma, double u, double H) {
    const double q = 2.0 * H - 1.0;
    const RealFn f = [&](double w) { return sigma(u - std::pow(w, 1.0 / q)); };
    QuadOptions opts;
    opts.abs_tol = 1e-12;
    opts.rel_tol = 1e-10;
    return integrate(f, 0.0, std::pow(u, q), opts).value / q;
}

}  // namespace

double iota(const Coefficient& sigma, double t, double H) {
    check_args(t, H);
    if (t == 0.0) return 0.0;
    const double ch = H * (2.0 * H - 1.0);
    const RealFn outer = [&](double u) {
        return sigma(u) * singular_factor(sigma, u, H);
    };
    QuadOptions opts;
    opts.abs_tol = 1e-9;
    opts.rel_tol = 1e-9;
    return 2.0 * ch * integrate(outer, 0.0, t, opts).value;
}

double iota_derivative(const Coefficient& sigma, double t, double H) {
    check_args(t, H);
    if (t == 0.0) return 0.0;
    const double ch = H * (2.0 * H - 1.0);
    return 2.0 * ch * sigma(t) * singular_factor(sigma, t, H);
}

IotaTable::IotaTable(const Coefficient& sigma, double T, double H, int samples)
    : T_(T) {
    if (samples < 8) throw ValidationError("iota table needs >= 8 samples");
    std::vector<double> t(samples), v(samples), d(samples);
    for (int i = 0; i < samples; ++i) {
        // Quadratic grading toward t = 0 where iota' loses smoothness.
        const double s = static_cast<double>(i) / (samples - 1);
        t[i] = T * s * s;
        v[i] = iota(sigma, t[i], H);
        d[i] = iota_derivative(sigma, t[i], H);
    }
    value_ = Pchip(t, v);
    derivative_ = Pchip(t, d);
}

IotaTable::IotaTable(double T, std::vector<double> t, std::vector<double> v,
                     std::vector<double> d)
    : T_(T) {
    derivative_ = Pchip(t, std::move(d));
    value_ = Pchip(std::move(t), std::move(v));
}

}  // namespace fbsde
