#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "fbsde/errors.hpp"
#include "fbsde/fbm.hpp"
#include "fbsde/serialize.hpp"

using namespace fbsde;

TEST_CASE("covariance closed form") {
    // diagonal is t^2H
    CHECK(fbm_covariance(0.75, 2.0, 2.0) ==
          doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-15));
    // the (s, t) = (0.5, 1) entry at H = 3/4 collapses to 1/2 exactly:
    // the 0.5^1.5 terms cancel
    CHECK(fbm_covariance(0.75, 0.5, 1.0) == 0.5);
    // H = 1/2 degenerates to Brownian covariance min(s, t)
    CHECK(fbm_covariance(0.5, 0.3, 0.9) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(fbm_covariance(0.5, 1.7, 0.4) == doctest::Approx(0.4).epsilon(1e-15));
    // symmetry
    CHECK(fbm_covariance(0.65, 0.2, 1.3) ==
          doctest::Approx(fbm_covariance(0.65, 1.3, 0.2)).epsilon(1e-15));
    // zero time pins the process at the origin
    CHECK(fbm_covariance(0.8, 0.0, 1.0) == 0.0);
}

TEST_CASE("grid validation") {
    CHECK_NOTHROW(validate_grid({0.0, 0.5, 1.0}));
    CHECK_THROWS_AS(validate_grid({}), ValidationError);
    CHECK_THROWS_AS(validate_grid({-0.1, 0.5}), ValidationError);
    CHECK_THROWS_AS(validate_grid({0.0, 0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(validate_grid({0.0, 0.7, 0.6}), ValidationError);
}

TEST_CASE("path Gram matrix is symmetric positive definite") {
    std::vector<double> grid{0.1, 0.4, 0.7, 1.0, 1.6};
    Eigen::MatrixXd g = fbm_gram(0.7, grid);
    REQUIRE(g.rows() == 5);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 5; ++i)
        CHECK(g(i, i) == doctest::Approx(std::pow(grid[i], 1.4)).epsilon(1e-14));
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("weighted Gram with unit sigma reduces to the path Gram") {
    std::vector<double> grid{0.25, 0.5, 0.75, 1.0};
    const double H = 0.75;
    Eigen::MatrixXd direct = fbm_gram(H, grid);
    Eigen::MatrixXd weighted = weighted_gram(H, Coefficient::constant(1.0), grid);
    // per-cell quadrature error accumulates across the block sums
    CHECK((direct - weighted).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("weighted Gram diagonal matches the exact variance for sigma = t") {
    // H = 3/4, sigma(s) = s: Var int_0^1 s dB = 2/7 in closed form
    std::vector<double> grid{0.5, 1.0};
    Eigen::MatrixXd g =
        weighted_gram(0.75, Coefficient::polynomial({0.0, 1.0}), grid);
    CHECK(g(1, 1) == doctest::Approx(2.0 / 7.0).epsilon(1e-7));
    // scaling law: Var at t = 1/2 is (1/2)^{2H + 2} of the t = 1 value
    CHECK(g(0, 0) ==
          doctest::Approx(2.0 / 7.0 * std::pow(0.5, 3.5)).epsilon(1e-6));
}

TEST_CASE("sampling is deterministic and thread-count independent") {
    std::vector<double> grid{0.0, 0.5, 1.0};
    FbmEnsemble a = sample_paths(0.75, grid, 512, 99, PathKind::FbmValues,
                                 Coefficient::constant(1.0), 1);
    FbmEnsemble b = sample_paths(0.75, grid, 512, 99, PathKind::FbmValues,
                                 Coefficient::constant(1.0), 4);
    CHECK((a.paths - b.paths).cwiseAbs().maxCoeff() == 0.0);
    // a grid time of zero yields the pinned column
    CHECK(a.paths.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.column_of(0.5) == 1);
    CHECK_THROWS_AS(a.column_of(0.3), DomainError);

    FbmEnsemble c = sample_paths(0.75, grid, 512, 100);
    CHECK((a.paths - c.paths).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("empirical Gram converges at the Monte Carlo rate") {
    std::vector<double> grid{0.2, 0.5, 0.8};
    Eigen::MatrixXd exact = fbm_gram(0.7, grid);
    std::vector<std::size_t> counts{2000, 8000, 32000};
    // a single run's slope is noisy; average the error over a few seeds
    std::vector<double> errs(counts.size(), 0.0);
    for (std::uint64_t seed : {1234u, 99u, 2024u}) {
        for (std::size_t k = 0; k < counts.size(); ++k) {
            FbmEnsemble e = sample_paths(0.7, grid, counts[k], seed);
            Eigen::MatrixXd gram, se;
            empirical_gram(e.paths, gram, se);
            errs[k] += (gram - exact).norm() / 3.0;
        }
    }
    CHECK(errs[2] < errs[0]);
    double slope = std::log(errs[2] / errs[0]) /
                   std::log(double(counts[2]) / double(counts[0]));
    CHECK(slope > -0.9);
    CHECK(slope < -0.2);
}

TEST_CASE("3-sigma Gram comparison detects a wrong Hurst index") {
    // the acceptance-style check must fail loudly when paths are sampled
    // at H = 0.6 but compared against the H = 0.75 covariance
    std::vector<double> grid;
    for (int j = 1; j <= 8; ++j) grid.push_back(j / 8.0);
    FbmEnsemble e = sample_paths(0.6, grid, 20000, 777);
    Eigen::MatrixXd gram, se;
    empirical_gram(e.paths, gram, se);

    Eigen::MatrixXd right = fbm_gram(0.6, grid);
    Eigen::MatrixXd wrong = fbm_gram(0.75, grid);
    auto fraction_within = [&](const Eigen::MatrixXd& target) {
        int hits = 0, total = 0;
        for (int i = 0; i < gram.rows(); ++i)
            for (int j = 0; j <= i; ++j) {
                ++total;
                if (std::abs(gram(i, j) - target(i, j)) <= 3.0 * se(i, j)) ++hits;
            }
        return double(hits) / double(total);
    };
    CHECK(fraction_within(right) >= 0.95);
    CHECK(fraction_within(wrong) < 0.5);
}

TEST_CASE("weighted-integral ensembles carry their kind and seed") {
    std::vector<double> grid{0.5, 1.0};
    FbmEnsemble e = sample_paths(0.75, grid, 4000, 5150,
                                 PathKind::WeightedIntegral,
                                 Coefficient::constant(0.5));
    CHECK(e.kind == PathKind::WeightedIntegral);
    CHECK(e.seed == 5150);
    // Var int_0^t (1/2) dB = t^{2H} / 4
    double var = e.paths.col(1).squaredNorm() / double(e.paths.rows());
    CHECK(var == doctest::Approx(0.25).epsilon(0.1));
}

TEST_CASE("ensemble binary round-trip is exact") {
    namespace fs = std::filesystem;
    std::vector<double> grid{0.0, 0.25, 1.0};
    FbmEnsemble e = sample_paths(0.8, grid, 300, 2024,
                                 PathKind::WeightedIntegral,
                                 Coefficient::polynomial({1.0, 0.5}));
    fs::path p = fs::temp_directory_path() / "fbsde_test_ensemble.bin";
    write_ensemble(p.string(), e);
    FbmEnsemble back = read_ensemble(p.string());
    CHECK(back.hurst == e.hurst);
    CHECK(back.kind == e.kind);
    CHECK(back.seed == e.seed);
    CHECK(back.grid == e.grid);
    REQUIRE(back.paths.rows() == e.paths.rows());
    CHECK((back.paths - e.paths).cwiseAbs().maxCoeff() == 0.0);  // bit-exact
    fs::remove(p);
}
