#include "fbsde/coefficient.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fbsde/errors.hpp"

namespace fbsde {

Coefficient Coefficient::constant(double c) {
    Coefficient out;
    out.kind_ = Kind::Constant;
    out.coeffs_ = {c};
    return out;
}

Coefficient Coefficient::polynomial(std::vector<double> coeffs) {
    if (coeffs.empty()) throw ValidationError("polynomial needs coefficients");
    Coefficient out;
    out.kind_ = Kind::Polynomial;
    out.coeffs_ = std::move(coeffs);
    return out;
}

Coefficient Coefficient::table(std::vector<double> t, std::vector<double> v) {
    Coefficient out;
    out.kind_ = Kind::Table;
    out.table_ = Pchip(std::move(t), std::move(v));
    out.coeffs_.clear();
    return out;
}

double Coefficient::operator()(double t) const {
    switch (kind_) {
        case Kind::Constant:
            return coeffs_[0];
        case Kind::Polynomial: {
            double acc = 0.0;
            for (std::size_t k = coeffs_.size(); k-- > 0;)
                acc = acc * t + coeffs_[k];
            return acc;
        }
        case Kind::Table:
            return table_.value(t);
    }
    return 0.0;
}

double Coefficient::integral(double a, double b) const {
    switch (kind_) {
        case Kind::Constant:
            return coeffs_[0] * (b - a);
        case Kind::Polynomial: {
            double acc = 0.0;
            for (std::size_t k = coeffs_.size(); k-- > 0;) {
                const double primitive =
                    coeffs_[k] / static_cast<double>(k + 1);
                acc += primitive * (std::pow(b, static_cast<double>(k + 1)) -
                                    std::pow(a, static_cast<double>(k + 1)));
            }
            return acc;
        }
        case Kind::Table:
            return table_.integral(a, b);
    }
    return 0.0;
}

double Coefficient::min_on(double a, double b, int probes) const {
    if (is_constant()) return coeffs_[0];
    double best = (*this)(a);
    for (int i = 1; i < probes; ++i) {
        const double t = a + (b - a) * i / (probes - 1);
        best = std::min(best, (*this)(t));
    }
    return best;
}

double Coefficient::max_on(double a, double b, int probes) const {
    if (is_constant()) return coeffs_[0];
    double best = (*this)(a);
    for (int i = 1; i < probes; ++i) {
        const double t = a + (b - a) * i / (probes - 1);
        best = std::max(best, (*this)(t));
    }
    return best;
}

std::string Coefficient::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::Constant:
            os << "constant(" << coeffs_[0] << ")";
            break;
        case Kind::Polynomial:
            os << "polynomial(degree " << coeffs_.size() - 1 << ")";
            break;
        case Kind::Table:
            os << "table(" << table_.nodes().size() << " nodes)";
            break;
    }
    return os.str();
}

void CoefficientSet::validate_sigma(double T, double floor) const {
    const int probes = 2001;
    double prev = sigma(0.0);
    for (int i = 0; i < probes; ++i) {
        const double t = T * i / (probes - 1);
        const double s = sigma(t);
        // A sign flip between probes proves a root even if no probe lands on it.
        if (std::abs(s) < floor || s * prev < 0.0)
            throw ValidationError("sigma vanishes near t=" + std::to_string(t));
        prev = s;
    }
}

}  // namespace fbsde
