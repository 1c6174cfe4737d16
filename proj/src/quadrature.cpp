#include "fbsde/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>

#include "fbsde/errors.hpp"

namespace fbsde {
namespace {

// Gauss-Kronrod 7-15 nodes/weights (positive half; node 0 last).
constexpr int kKronrodHalf = 8;
constexpr double kXgk[kKronrodHalf] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[kKronrodHalf] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

Panel kronrod_panel(const RealFn& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kron = kWgk[7] * fc;
    double gauss = kWg[3] * fc;
    for (int i = 0; i < 7; ++i) {
        const double x = h * kXgk[i];
        const double fsum = f(c - x) + f(c + x);
        kron += kWgk[i] * fsum;
        if (i % 2 == 1) gauss += kWg[i / 2] * fsum;
    }
    kron *= h;
    gauss *= h;
    // QUADPACK-style sharpened estimate of the Kronrod error.
    double err = std::abs(kron - gauss);
    if (err > 1e-250) err = std::min(err, 200.0 * err * std::sqrt(200.0 * err));
    return {a, b, kron, err};
}

}  // namespace

QuadResult integrate(const RealFn& f, double a, double b,
                     const QuadOptions& opts) {
    if (a == b) return {0.0, 0.0, 0};
    double sign = 1.0;
    if (a > b) {
        std::swap(a, b);
        sign = -1.0;
    }
    std::priority_queue<Panel> queue;
    queue.push(kronrod_panel(f, a, b));
    double total_value = queue.top().value;
    double total_error = queue.top().error;
    std::size_t panels = 1;
    const double min_width = (b - a) * std::ldexp(1.0, -opts.max_depth);
    while (total_error >
           std::max(opts.abs_tol, opts.rel_tol * std::abs(total_value))) {
        if (panels >= opts.max_panels || queue.top().b - queue.top().a < min_width)
            throw QuadratureError("adaptive quadrature did not converge",
                                  opts.abs_tol, total_error);
        Panel worst = queue.top();
        queue.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        Panel left = kronrod_panel(f, worst.a, mid);
        Panel right = kronrod_panel(f, mid, worst.b);
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
        ++panels;
    }
    return {sign * total_value, total_error, panels};
}

namespace {

std::map<int, std::pair<std::vector<double>, std::vector<double>>> gl_cache;
std::mutex gl_mutex;

// Legendre nodes by Newton iteration on the three-term recurrence.
void build_gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
}

}  // namespace

const std::vector<double>& gauss_legendre_nodes(int n) {
    std::lock_guard<std::mutex> lock(gl_mutex);
    auto it = gl_cache.find(n);
    if (it == gl_cache.end()) {
        std::vector<double> x, w;
        build_gauss_legendre(n, x, w);
        it = gl_cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first;
    }
    return it->second.first;
}

const std::vector<double>& gauss_legendre_weights(int n) {
    gauss_legendre_nodes(n);
    std::lock_guard<std::mutex> lock(gl_mutex);
    return gl_cache.at(n).second;
}

double gauss_legendre(const RealFn& f, double a, double b, int n) {
    const auto& x = gauss_legendre_nodes(n);
    const auto& w = gauss_legendre_weights(n);
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += w[i] * f(c + h * x[i]);
    return h * sum;
}

namespace {
std::map<int, HermiteRule> gh_cache;
std::mutex gh_mutex;
}  // namespace

const HermiteRule& gauss_hermite(int n) {
    std::lock_guard<std::mutex> lock(gh_mutex);
    auto it = gh_cache.find(n);
    if (it == gh_cache.end()) {
        Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
        for (int k = 1; k < n; ++k) {
            const double off = std::sqrt(0.5 * k);
            jacobi(k, k - 1) = jacobi(k - 1, k) = off;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
        HermiteRule rule;
        rule.nodes.resize(n);
        rule.weights.resize(n);
        const double mu0 = std::sqrt(M_PI);
        for (int i = 0; i < n; ++i) {
            rule.nodes[i] = es.eigenvalues()(i);
            const double v0 = es.eigenvectors()(0, i);
            rule.weights[i] = mu0 * v0 * v0;
        }
        it = gh_cache.emplace(n, std::move(rule)).first;
    }
    return it->second;
}

double hermite_expectation(const RealFn& f, double mean, double scale, int n) {
    const HermiteRule& rule = gauss_hermite(n);
    const double s = scale * std::sqrt(2.0);
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
        sum += rule.weights[i] * f(mean + s * rule.nodes[i]);
    return sum / std::sqrt(M_PI);
}

double hermite_expectation_adaptive(const RealFn& f, double mean, double scale,
                                    double rel_tol, int start_n, int max_n) {
    double prev = hermite_expectation(f, mean, scale, start_n);
    for (int n = 2 * start_n; n <= max_n; n *= 2) {
        const double cur = hermite_expectation(f, mean, scale, n);
        const double denom = std::max(std::abs(cur), 1e-300);
        if (std::abs(cur - prev) <= rel_tol * denom) return cur;
        prev = cur;
    }
    throw QuadratureError("Hermite node doubling did not settle", rel_tol,
                          std::abs(prev));
}

}  // namespace fbsde
