#include "fbsde/parabolic.hpp"

#include <algorithm>
#include <cmath>

#include "fbsde/errors.hpp"

namespace fbsde {
namespace {

struct LevelOperator {
    // Tridiagonal action coefficients: (L u)_i = sub*u_{i-1} + diag*u_i +
    // sup*u_{i+1}, identical for all interior nodes (coefficients depend on
    // time only).
    double sub = 0.0, diag = 0.0, sup = 0.0;
    bool blended = false;
};

LevelOperator level_operator(double D, double a, double dx,
                             double peclet_limit) {
    LevelOperator op;
    const double peclet = std::abs(a) * dx / std::max(D, 1e-300);
    const double w = (peclet <= peclet_limit) ? 1.0 : peclet_limit / peclet;
    op.blended = w < 1.0;
    const double idx2 = 1.0 / (dx * dx);
    op.sub += D * idx2;
    op.diag += -2.0 * D * idx2;
    op.sup += D * idx2;
    op.sub += -w * a / (2.0 * dx);
    op.sup += w * a / (2.0 * dx);
    const double uw = (1.0 - w) * a / dx;
    if (a >= 0.0) {
        // Information travels from the right: forward difference.
        op.diag += -uw;
        op.sup += uw;
    } else {
        op.diag += uw;
        op.sub += -uw;
    }
    return op;
}

// Thomas solve of a constant-stencil tridiagonal system with the edge rows
// already folded (in-place on rhs).
void solve_tridiagonal(const std::vector<double>& sub,
                       const std::vector<double>& diag,
                       const std::vector<double>& sup, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    std::vector<double> c(n);
    c[0] = sup[0] / diag[0];
    rhs[0] /= diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        const double m = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / m;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

}  // namespace

Eigen::MatrixXd march_backward(const ParabolicProblem& problem,
                               const std::vector<double>& t,
                               const std::vector<double>& x,
                               const ParabolicOptions& opts,
                               ParabolicStats* stats) {
    const int nt = static_cast<int>(t.size());
    const int nx = static_cast<int>(x.size());
    if (nt < 2 || nx < 5)
        throw ValidationError("parabolic march needs >= 2 times, >= 5 nodes");
    const double dx = x[1] - x[0];
    Eigen::MatrixXd u(nt, nx);
    for (int i = 0; i < nx; ++i) u(nt - 1, i) = problem.terminal(x[i]);

    ParabolicStats local;
    const int ni = nx - 2;  // interior unknowns
    std::vector<double> sub(ni), diag(ni), sup(ni), rhs(ni), base_rhs(ni);
    std::vector<double> unew(nx), ubar(nx);

    for (int j = nt - 2; j >= 0; --j) {
        const double dt = t[j + 1] - t[j];
        const double tmid = 0.5 * (t[j] + t[j + 1]);
        const LevelOperator lold = level_operator(
            problem.diffusion(t[j + 1]), problem.drift(t[j + 1]), dx,
            opts.peclet_limit);
        const LevelOperator lnew = level_operator(
            problem.diffusion(t[j]), problem.drift(t[j]), dx, opts.peclet_limit);
        if (lold.blended || lnew.blended) ++local.upwind_blend_steps;

        const double ex = dt * (1.0 - opts.theta);
        for (int i = 1; i <= ni; ++i)
            base_rhs[i - 1] =
                u(j + 1, i) + ex * (lold.sub * u(j + 1, i - 1) +
                                    lold.diag * u(j + 1, i) +
                                    lold.sup * u(j + 1, i + 1));

        const double im = dt * opts.theta;
        std::fill(sub.begin(), sub.end(), -im * lnew.sub);
        std::fill(diag.begin(), diag.end(), 1.0 - im * lnew.diag);
        std::fill(sup.begin(), sup.end(), -im * lnew.sup);
        // Vanishing second difference at the edges: u_0 = 2u_1 - u_2 and the
        // mirrored relation fold into the first/last interior rows.
        diag[0] += 2.0 * sub[0];
        sup[0] -= sub[0];
        sub[0] = 0.0;
        diag[ni - 1] += 2.0 * sup[ni - 1];
        sub[ni - 1] -= sup[ni - 1];
        sup[ni - 1] = 0.0;

        for (int i = 0; i < nx; ++i) unew[i] = u(j + 1, i);
        const double zscale = problem.zscale ? problem.zscale(tmid) : 1.0;
        double residual = 0.0;
        int iters = 0;
        const int max_iters = problem.generator ? opts.max_fp_iters : 1;
        for (; iters < max_iters; ++iters) {
            rhs = base_rhs;
            if (problem.generator) {
                for (int i = 0; i < nx; ++i)
                    ubar[i] = 0.5 * (unew[i] + u(j + 1, i));
                for (int i = 1; i <= ni; ++i) {
                    const double ux =
                        (ubar[i + 1] - ubar[i - 1]) / (2.0 * dx);
                    rhs[i - 1] += dt * problem.generator(tmid, x[i], ubar[i],
                                                         zscale * ux);
                }
            }
            solve_tridiagonal(sub, diag, sup, rhs);
            residual = 0.0;
            double scale = 1.0;
            for (int i = 1; i <= ni; ++i) {
                residual = std::max(residual, std::abs(rhs[i - 1] - unew[i]));
                scale = std::max(scale, std::abs(rhs[i - 1]));
                unew[i] = rhs[i - 1];
            }
            unew[0] = 2.0 * unew[1] - unew[2];
            unew[nx - 1] = 2.0 * unew[nx - 2] - unew[nx - 3];
            if (!problem.generator || residual <= opts.fp_tol * scale) break;
        }
        if (problem.generator && iters == opts.max_fp_iters)
            throw ConvergenceError("generator fixed point stalled", j);
        local.max_fp_iters_used = std::max(local.max_fp_iters_used, iters + 1);
        local.max_step_residual = std::max(local.max_step_residual, residual);
        for (int i = 0; i < nx; ++i) u(j, i) = unew[i];
    }
    if (stats) *stats = local;
    return u;
}

Eigen::MatrixXd row_derivative(const Eigen::MatrixXd& u, double dx) {
    const Eigen::Index nt = u.rows(), nx = u.cols();
    Eigen::MatrixXd d(nt, nx);
    for (Eigen::Index j = 0; j < nt; ++j) {
        for (Eigen::Index i = 2; i < nx - 2; ++i)
            d(j, i) = (-u(j, i + 2) + 8.0 * u(j, i + 1) - 8.0 * u(j, i - 1) +
                       u(j, i - 2)) /
                      (12.0 * dx);
        d(j, 1) = (u(j, 2) - u(j, 0)) / (2.0 * dx);
        d(j, nx - 2) = (u(j, nx - 1) - u(j, nx - 3)) / (2.0 * dx);
        d(j, 0) = (-3.0 * u(j, 0) + 4.0 * u(j, 1) - u(j, 2)) / (2.0 * dx);
        d(j, nx - 1) =
            (3.0 * u(j, nx - 1) - 4.0 * u(j, nx - 2) + u(j, nx - 3)) / (2.0 * dx);
    }
    return d;
}

Eigen::MatrixXd row_second_derivative(const Eigen::MatrixXd& u, double dx) {
    const Eigen::Index nt = u.rows(), nx = u.cols();
    const double idx2 = 1.0 / (dx * dx);
    Eigen::MatrixXd d(nt, nx);
    for (Eigen::Index j = 0; j < nt; ++j) {
        for (Eigen::Index i = 2; i < nx - 2; ++i)
            d(j, i) = (-u(j, i + 2) + 16.0 * u(j, i + 1) - 30.0 * u(j, i) +
                       16.0 * u(j, i - 1) - u(j, i - 2)) *
                      idx2 / 12.0;
        d(j, 1) = (u(j, 2) - 2.0 * u(j, 1) + u(j, 0)) * idx2;
        d(j, nx - 2) = (u(j, nx - 1) - 2.0 * u(j, nx - 2) + u(j, nx - 3)) * idx2;
        d(j, 0) = (2.0 * u(j, 0) - 5.0 * u(j, 1) + 4.0 * u(j, 2) - u(j, 3)) * idx2;
        d(j, nx - 1) = (2.0 * u(j, nx - 1) - 5.0 * u(j, nx - 2) +
                        4.0 * u(j, nx - 3) - u(j, nx - 4)) *
                       idx2;
    }
    return d;
}

std::vector<double> graded_time_grid(double T, int n, double power) {
    if (n < 1) throw ValidationError("time grid needs >= 1 step");
    std::vector<double> t(n + 1);
    for (int j = 0; j <= n; ++j)
        t[j] = T * std::pow(static_cast<double>(j) / n, power);
    t[n] = T;
    return t;
}

std::vector<double> uniform_grid(double lo, double hi, int n) {
    if (n < 2 || !(hi > lo)) throw ValidationError("bad uniform grid request");
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i)
        x[i] = lo + (hi - lo) * i / (n - 1);
    x[n - 1] = hi;
    return x;
}

}  // namespace fbsde
