#pragma once

#include <string>
#include <vector>

#include "fbsde/interp.hpp"

namespace fbsde {

// Deterministic time coefficient on [0, T]: a constant, a polynomial in t,
// or a sampled table interpolated by a shape-preserving cubic.
class Coefficient {
  public:
    enum class Kind { Constant, Polynomial, Table };

    Coefficient() = default;  // the zero constant
    static Coefficient constant(double c);
    // coeffs[k] multiplies t^k.
    static Coefficient polynomial(std::vector<double> coeffs);
    static Coefficient table(std::vector<double> t, std::vector<double> v);

    double operator()(double t) const;
    // Exact antiderivative-based integral over [a, b] (cubic-exact for tables).
    double integral(double a, double b) const;
    // Extremes probed on a dense uniform grid (exact for constants).
    double min_on(double a, double b, int probes = 20001) const;
    double max_on(double a, double b, int probes = 20001) const;

    Kind kind() const { return kind_; }
    bool is_constant() const { return kind_ == Kind::Constant; }
    double constant_value() const { return coeffs_[0]; }
    const std::vector<double>& coeffs() const { return coeffs_; }
    const Pchip& interpolant() const { return table_; }
    std::string describe() const;

  private:
    Kind kind_ = Kind::Constant;
    std::vector<double> coeffs_{0.0};
    Pchip table_;
};

// Coefficient bundle of a driver/BSDE problem. Entries default to zero
// (sigma to one); which ones matter depends on the consumer.
struct CoefficientSet {
    Coefficient b = Coefficient::constant(0.0);
    Coefficient sigma = Coefficient::constant(1.0);
    Coefficient alpha = Coefficient::constant(0.0);
    Coefficient beta = Coefficient::constant(0.0);
    Coefficient gamma = Coefficient::constant(0.0);
    double eta0 = 0.0;

    // sigma must stay bounded away from zero on [0, T].
    void validate_sigma(double T, double floor = 1e-12) const;
};

}  // namespace fbsde
