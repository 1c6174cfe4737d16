#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbsde/gauss_transfer.hpp"
#include "fbsde/heat_semigroup.hpp"
#include "fbsde/mixed_pde.hpp"

namespace fbsde {

// Named generator built from a small registry; carries the declared
// Lipschitz constant of its own parameters.
struct GeneratorConfig {
    std::string kind = "none";
    std::vector<double> params;
    // `coeffs` is needed only by kind "driver-linear".
    GeneratorFn build(const CoefficientSet* coeffs = nullptr) const;
    double lipschitz(const CoefficientSet* coeffs = nullptr,
                     double horizon = 1.0) const;
    std::string describe() const;
};

// One experiment as read from a JSON file. Unknown keys are rejected so a
// typo cannot silently fall back to a default.
struct ExperimentConfig {
    std::string problem = "fbsde-nonlinear";  // fbsde-linear | fbsde-nonlinear
                                              // | gauss-transfer
    double horizon = 1.0;
    double hurst = 0.75;
    std::uint64_t seed = 20240817;
    int threads = 1;

    CoefficientSet coeffs;
    std::string terminal_kind = "softplus";
    std::vector<double> terminal_params{1.0};
    GeneratorConfig generator;

    // grids
    int nx = 400;
    int nt = 400;
    double domain_width = 8.0;
    double time_grading = 2.0;

    // sampling
    std::size_t paths = 100000;
    std::size_t tail_paths = 0;  // 0 = reuse `paths`

    // envelope calibration / verification
    CalibrationOptions envelope;
    double slack = 3.0;      // KDE tolerance band in local standard errors
    double region_sd = 2.5;  // comparison half-width in marginal sd units

    // gauss-transfer extras
    std::string clock_kind = "linear";  // linear | power | table
    double clock_scale = 1.0;
    double clock_exponent = 1.0;
    std::string clock_csv;  // table clock sampled from a two-column file
    std::string z_dependence = "none";

    std::vector<double> times{0.5};  // probe times for reports
    std::vector<double> eps_sweep;   // representation-check increments
    double rep_t = 0.5, rep_y = 0.0, rep_z = 0.0;
    std::string rep_estimator = "pde";

    std::string raw_json;  // exact text the config was parsed from

    TerminalMap build_terminal() const;
    LinearFbsdeSpec build_linear_spec() const;
    NonlinearFbsdeSpec build_nonlinear_spec() const;
    GaussianDriverSpec build_driver_spec() const;
    PdeSolveOptions pde_options() const;
    std::size_t tail_sample_count() const {
        return tail_paths ? tail_paths : paths;
    }
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Machine-readable outcome of a run: named checks with values against
// tolerances, produced files with digests, and the config echo.
class RunReport {
  public:
    explicit RunReport(const ExperimentConfig& config) : config_(config) {}

    void add_check(const std::string& name, bool pass, double value,
                   double tolerance);
    void note(const std::string& key, const std::string& value);
    void add_file(const std::string& path);
    bool all_passed() const { return failed_ == 0; }
    std::size_t check_count() const { return names_.size(); }

    // Deterministic JSON (sorted keys, 17-digit floats, no timestamps).
    std::string to_json() const;
    void write(const std::string& path) const;

  private:
    ExperimentConfig config_;
    std::vector<std::string> names_;
    std::vector<bool> passes_;
    std::vector<double> values_, tolerances_;
    std::vector<std::pair<std::string, std::string>> notes_;
    std::vector<std::pair<std::string, std::string>> files_;
    std::size_t failed_ = 0;
};

}  // namespace fbsde
