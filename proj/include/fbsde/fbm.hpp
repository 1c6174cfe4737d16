#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fbsde/coefficient.hpp"

namespace fbsde {

// Covariance of fractional Brownian motion with Hurst index H in (0, 1):
// R_H(s, t) = (t^2H + s^2H - |t-s|^2H) / 2 for s, t >= 0.
double fbm_covariance(double H, double s, double t);

// Grid points must be nonnegative and strictly increasing.
void validate_grid(const std::vector<double>& grid);

// Gram matrix of path values (B^H_{t_i}) at the grid points (closed form).
Eigen::MatrixXd fbm_gram(double H, const std::vector<double>& grid);

// Gram matrix of X_{t_i} = int_0^{t_i} sigma dB^H for H > 1/2:
// Cov(X_s, X_t) = H(2H-1) int_0^s int_0^t sigma_u sigma_v |u-v|^{2H-2} du dv.
// Assembled from per-cell block integrals; the |u-v|^{2H-2} singularity on
// touching cells is removed by the substitution w = (u-v)^{2H-1}.
Eigen::MatrixXd weighted_gram(double H, const Coefficient& sigma,
                              const std::vector<double>& grid);

enum class PathKind { FbmValues, WeightedIntegral };

// Exact joint Gaussian samples (dense Cholesky of the Gram matrix).
// paths(i, j) = value of path i at grid[j]; a grid point at t = 0 yields an
// identically zero column. Thread-count independent for fixed seed.
struct FbmEnsemble {
    double hurst = 0.5;
    PathKind kind = PathKind::FbmValues;
    std::uint64_t seed = 0;
    std::vector<double> grid;
    Eigen::MatrixXd paths;

    // Column index of grid time t (within tol), throws DomainError if absent.
    std::size_t column_of(double t, double tol = 1e-12) const;
};

FbmEnsemble sample_paths(double H, const std::vector<double>& grid,
                         std::size_t n_paths, std::uint64_t seed,
                         PathKind kind = PathKind::FbmValues,
                         const Coefficient& sigma = Coefficient::constant(1.0),
                         int threads = 1);

// Empirical Gram matrix paths^T paths / n and the entrywise Monte Carlo
// standard error estimate sqrt((mean(x^2 y^2) - mean(xy)^2) / n).
void empirical_gram(const Eigen::MatrixXd& paths, Eigen::MatrixXd& gram,
                    Eigen::MatrixXd& std_error);

}  // namespace fbsde
