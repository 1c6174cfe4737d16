#pragma once

#include <vector>

#include "fbsde/coefficient.hpp"
#include "fbsde/interp.hpp"

namespace fbsde {

// iota(t) = Var(int_0^t sigma dB^H)
//         = H(2H-1) int_0^t int_0^t sigma_u sigma_v |u-v|^{2H-2} du dv,
// for H in (1/2, 1). The |u-v|^{2H-2} singularity is removed by the
// substitution w = (u-v)^{2H-1}; the outer integral is adaptive to 1e-8
// absolute. For unit sigma, iota(t) = t^{2H} up to quadrature error.
double iota(const Coefficient& sigma, double t, double H);

// d/dt iota(t) = 2 H(2H-1) sigma(t) int_0^t sigma_v (t-v)^{2H-2} dv.
// Vanishes as t -> 0+, which degenerates the diffusion of the associated
// parabolic problem; callers must grade time steps accordingly.
double iota_derivative(const Coefficient& sigma, double t, double H);

// iota and iota' sampled on a grid, interpolated monotonically in between.
// Used by the parabolic solvers so each step does not re-run quadrature.
class IotaTable {
  public:
    IotaTable() = default;
    IotaTable(const Coefficient& sigma, double T, double H, int samples = 257);
    // Rebuild from previously sampled nodes (container reload path).
    IotaTable(double T, std::vector<double> t, std::vector<double> v,
              std::vector<double> d);
    double value(double t) const { return value_.value(t); }
    double derivative(double t) const { return derivative_.value(t); }
    double horizon() const { return T_; }
    bool empty() const { return value_.nodes().empty(); }

    const std::vector<double>& sample_times() const { return value_.nodes(); }
    const std::vector<double>& sample_values() const { return value_.values(); }
    const std::vector<double>& sample_derivatives() const {
        return derivative_.values();
    }

  private:
    double T_ = 0.0;
    Pchip value_, derivative_;
};

}  // namespace fbsde
