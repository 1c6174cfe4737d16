#include "fbsde/fbm.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <thread>

#include "fbsde/errors.hpp"
#include "fbsde/quadrature.hpp"
#include "fbsde/rng.hpp"

namespace fbsde {

double fbm_covariance(double H, double s, double t) {
    if (!(H > 0.0 && H < 1.0))
        throw ValidationError("Hurst index must lie in (0, 1)");
    if (s < 0.0 || t < 0.0)
        throw ValidationError("covariance arguments must be nonnegative");
    const double h2 = 2.0 * H;
    return 0.5 * (std::pow(t, h2) + std::pow(s, h2) -
                  std::pow(std::abs(t - s), h2));
}

void validate_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw ValidationError("empty time grid");
    if (grid.front() < 0.0) throw ValidationError("grid points must be >= 0");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw ValidationError("grid points must strictly increase");
}

Eigen::MatrixXd fbm_gram(double H, const std::vector<double>& grid) {
    validate_grid(grid);
    const std::size_t n = grid.size();
    Eigen::MatrixXd g(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j)
            g(i, j) = g(j, i) = fbm_covariance(H, grid[i], grid[j]);
    return g;
}

namespace {

// Inner kernel integral int_c^d sigma(v) (u - v)^{2H-2} dv for u >= d,
// desingularized by w = (u - v)^{2H-1}. The transformed integrand is C^1
// down to w = 0 because 1/(2H-1) > 1 for H in (1/2, 1).
double inner_kernel_integral(const Coefficient& sigma, double u, double c,
                             double d, double H, int order) {
    const double q = 2.0 * H - 1.0;
    const double w_lo = std::pow(std::max(u - d, 0.0), q);
    const double w_hi = std::pow(u - c, q);
    const auto& x = gauss_legendre_nodes(order);
    const auto& w = gauss_legendre_weights(order);
    const double mid = 0.5 * (w_lo + w_hi), half = 0.5 * (w_hi - w_lo);
    double sum = 0.0;
    for (int i = 0; i < order; ++i) {
        const double ww = mid + half * x[i];
        sum += w[i] * sigma(u - std::pow(ww, 1.0 / q));
    }
    return half * sum / q;
}

// C_H * int_{I_k} int_{I_l} sigma sigma |u-v|^{2H-2}, I_k = [a, b] at or
// above I_l = [c, d].
double block_integral(const Coefficient& sigma, double a, double b, double c,
                      double d, double H, int order) {
    const double ch = H * (2.0 * H - 1.0);
    const auto& x = gauss_legendre_nodes(order);
    const auto& w = gauss_legendre_weights(order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double sum = 0.0;
    if (a == c && b == d) {
        // Diagonal cell: fold onto {v < u} and double.
        for (int i = 0; i < order; ++i) {
            const double u = mid + half * x[i];
            sum += w[i] * sigma(u) * inner_kernel_integral(sigma, u, a, u, H, order);
        }
        return 2.0 * ch * half * sum;
    }
    for (int i = 0; i < order; ++i) {
        const double u = mid + half * x[i];
        sum += w[i] * sigma(u) * inner_kernel_integral(sigma, u, c, d, H, order);
    }
    return ch * half * sum;
}

}  // namespace

Eigen::MatrixXd weighted_gram(double H, const Coefficient& sigma,
                              const std::vector<double>& grid) {
    validate_grid(grid);
    if (!(H > 0.5))
        throw ValidationError("weighted integrals need H > 1/2");
    const int order = 16;
    const std::size_t n = grid.size();
    // Cell edges 0 = e_0 < e_1 < ... ; e_i = grid[i] unless grid starts at 0.
    std::vector<double> edges;
    edges.push_back(0.0);
    for (double t : grid)
        if (t > 0.0) edges.push_back(t);
    const std::size_t m = edges.size() - 1;
    Eigen::MatrixXd cells = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t l = 0; l <= k; ++l) {
            const double v = block_integral(sigma, edges[k], edges[k + 1],
                                            edges[l], edges[l + 1], H, order);
            cells(k, l) = cells(l, k) = v;
        }
    // Prefix-sum the cells into covariances of the running integrals.
    Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(m + 1, m + 1);
    for (std::size_t k = 1; k <= m; ++k)
        for (std::size_t l = 1; l <= m; ++l)
            prefix(k, l) = cells(k - 1, l - 1) + prefix(k - 1, l) +
                           prefix(k, l - 1) - prefix(k - 1, l - 1);
    Eigen::MatrixXd g(n, n);
    const std::size_t offset = (grid.front() == 0.0) ? 0 : 1;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            g(i, j) = prefix(i + offset, j + offset);
    return g;
}

FbmEnsemble sample_paths(double H, const std::vector<double>& grid,
                         std::size_t n_paths, std::uint64_t seed, PathKind kind,
                         const Coefficient& sigma, int threads) {
    validate_grid(grid);
    if (n_paths == 0) throw ValidationError("need at least one path");
    const bool has_zero = grid.front() == 0.0;
    std::vector<double> positive(grid.begin() + (has_zero ? 1 : 0), grid.end());
    const std::size_t np = positive.size();
    Eigen::MatrixXd gram =
        (kind == PathKind::FbmValues)
            ? fbm_gram(H, positive)
            : weighted_gram(H, sigma, positive);
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
        const double jitter = 1e-12 * gram.trace() / std::max<std::size_t>(np, 1);
        gram.diagonal().array() += jitter;
        llt.compute(gram);
        if (llt.info() != Eigen::Success)
            throw ConditioningError("Gram matrix not positive definite");
    }
    const Eigen::MatrixXd lt = llt.matrixL().transpose();

    FbmEnsemble out;
    out.hurst = H;
    out.kind = kind;
    out.seed = seed;
    out.grid = grid;
    out.paths.resize(n_paths, grid.size());
    if (has_zero) out.paths.col(0).setZero();
    const std::size_t col0 = has_zero ? 1 : 0;

    const std::size_t n_blocks = (n_paths + kPathBlock - 1) / kPathBlock;
    auto fill_block = [&](std::size_t blk) {
        const std::size_t row0 = blk * kPathBlock;
        const std::size_t rows = std::min(kPathBlock, n_paths - row0);
        const std::vector<double> z = normal_block(seed, blk, rows * np);
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>
            zmat(z.data(), rows, np);
        out.paths.block(row0, col0, rows, np).noalias() = zmat * lt;
    };
    if (threads <= 1 || n_blocks <= 1) {
        for (std::size_t blk = 0; blk < n_blocks; ++blk) fill_block(blk);
    } else {
        std::vector<std::thread> pool;
        const int nt = std::min<std::size_t>(threads, n_blocks);
        for (int t = 0; t < nt; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t blk = t; blk < n_blocks; blk += nt)
                    fill_block(blk);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

std::size_t FbmEnsemble::column_of(double t, double tol) const {
    for (std::size_t j = 0; j < grid.size(); ++j)
        if (std::abs(grid[j] - t) <= tol) return j;
    throw DomainError("time " + std::to_string(t) + " not on ensemble grid");
}

void empirical_gram(const Eigen::MatrixXd& paths, Eigen::MatrixXd& gram,
                    Eigen::MatrixXd& std_error) {
    const double n = static_cast<double>(paths.rows());
    gram = paths.transpose() * paths / n;
    const Eigen::MatrixXd sq = paths.array().square().matrix();
    const Eigen::MatrixXd m4 = sq.transpose() * sq / n;
    std_error = ((m4.array() - gram.array().square()).max(0.0) / n).sqrt();
}

}  // namespace fbsde
