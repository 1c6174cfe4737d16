#include "fbsde/interp.hpp"

#include <algorithm>
#include <cmath>

#include "fbsde/errors.hpp"

namespace fbsde {
namespace {

double edge_slope(double h0, double h1, double del0, double del1) {
    // Three-point one-sided estimate with the usual shape clamps.
    double d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if (d * del0 <= 0.0) return 0.0;
    if (del0 * del1 < 0.0 && std::abs(d) > 3.0 * std::abs(del0))
        return 3.0 * del0;
    return d;
}

}  // namespace

Pchip::Pchip(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
        throw ValidationError("interpolant needs >= 2 nodes, equal sizes");
    for (std::size_t i = 1; i < n; ++i)
        if (!(x_[i] > x_[i - 1]))
            throw ValidationError("interpolant nodes must strictly increase");
    d_.assign(n, 0.0);
    if (n == 2) {
        d_[0] = d_[1] = (y_[1] - y_[0]) / (x_[1] - x_[0]);
        return;
    }
    std::vector<double> h(n - 1), del(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        del[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (del[i - 1] * del[i] <= 0.0) {
            d_[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            d_[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
        }
    }
    d_[0] = edge_slope(h[0], h[1], del[0], del[1]);
    d_[n - 1] = edge_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
}

std::size_t Pchip::segment(double t) const {
    if (x_.size() < 2) throw LabError("interpolant is empty");
    if (t <= x_.front()) return 0;
    if (t >= x_.back()) return x_.size() - 2;
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    return static_cast<std::size_t>(it - x_.begin()) - 1;
}

double Pchip::value(double t) const {
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    const double h10 = s * (1.0 - s) * (1.0 - s);
    const double h01 = s * s * (3.0 - 2.0 * s);
    const double h11 = s * s * (s - 1.0);
    return h00 * y_[i] + h * h10 * d_[i] + h01 * y_[i + 1] + h * h11 * d_[i + 1];
}

double Pchip::derivative(double t) const {
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double g00 = 6.0 * s * (s - 1.0);
    const double g10 = (1.0 - s) * (1.0 - 3.0 * s);
    const double g01 = -g00;
    const double g11 = s * (3.0 * s - 2.0);
    return (g00 * y_[i] + g01 * y_[i + 1]) / h + g10 * d_[i] + g11 * d_[i + 1];
}

double Pchip::second_derivative(double t) const {
    const std::size_t i = segment(t);
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double k00 = (12.0 * s - 6.0) / (h * h);
    const double k10 = (6.0 * s - 4.0) / h;
    const double k11 = (6.0 * s - 2.0) / h;
    return k00 * (y_[i] - y_[i + 1]) + k10 * d_[i] + k11 * d_[i + 1];
}

double Pchip::segment_integral(std::size_t i, double a, double b) const {
    const double h = x_[i + 1] - x_[i];
    auto antiderivative = [&](double t) {
        const double s = (t - x_[i]) / h;
        const double s2 = s * s, s3 = s2 * s, s4 = s2 * s2;
        const double a00 = s - s3 + 0.5 * s4;                 // int h00
        const double a10 = 0.5 * s2 - (2.0 / 3.0) * s3 + 0.25 * s4;  // int h10
        const double a01 = s3 - 0.5 * s4;                     // int h01
        const double a11 = 0.25 * s4 - s3 / 3.0;              // int h11
        return h * (a00 * y_[i] + h * a10 * d_[i] + a01 * y_[i + 1] +
                    h * a11 * d_[i + 1]);
    };
    return antiderivative(b) - antiderivative(a);
}

double Pchip::integral(double a, double b) const {
    if (a == b) return 0.0;
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }
    const std::size_t ia = segment(a);
    const std::size_t ib = segment(b);
    if (ia == ib) return sign * segment_integral(ia, a, b);
    double sum = segment_integral(ia, a, x_[ia + 1]);
    for (std::size_t i = ia + 1; i < ib; ++i)
        sum += segment_integral(i, x_[i], x_[i + 1]);
    sum += segment_integral(ib, x_[ib], b);
    return sign * sum;
}

}  // namespace fbsde
