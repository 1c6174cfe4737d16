#pragma once

#include <vector>

namespace fbsde {

// Shape-preserving cubic Hermite interpolant (Fritsch-Carlson slopes).
// Monotone data yields a monotone interpolant; evaluation outside the node
// range clamps to the end segments' cubics.
class Pchip {
  public:
    Pchip() = default;
    // x strictly increasing, sizes equal and >= 2.
    Pchip(std::vector<double> x, std::vector<double> y);

    double value(double t) const;
    double derivative(double t) const;
    double second_derivative(double t) const;
    // Exact integral of the piecewise cubic over [a, b] (a <= b or not).
    double integral(double a, double b) const;

    const std::vector<double>& nodes() const { return x_; }
    const std::vector<double>& values() const { return y_; }
    const std::vector<double>& slopes() const { return d_; }

  private:
    std::vector<double> x_, y_, d_;
    std::size_t segment(double t) const;
    double segment_integral(std::size_t i, double a, double b) const;
};

}  // namespace fbsde
