#pragma once

#include <string>
#include <vector>

namespace fbsde {

// One verdict per suite criterion. `value` is the measured figure of merit,
// `budget` the pinned limit it is compared against (direction in `detail`).
struct CriterionResult {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double budget = 0.0;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    int threads = 4;
    std::string filter;  // run only criteria whose name contains this
};

// Runs the pinned verification suite (fixed problems, seeds and tolerances;
// no configuration reaches the batteries). Prints one line per criterion as
// it completes.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts = {});

// Writes acceptance_report.json into out_dir and returns the process exit
// status (0 iff every criterion passed).
int cmd_verify_all(const std::string& out_dir, const AcceptanceOptions& opts);

}  // namespace fbsde
