#pragma once

#include <stdexcept>
#include <string>

namespace fbsde {

// Base class for everything this library throws on purpose.
struct LabError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad inputs: parameters outside their domain, malformed configs,
// hypothesis probes that fail.
struct ValidationError : LabError {
    using LabError::LabError;
};

// Adaptive quadrature gave up before reaching the requested tolerance.
// `achieved` is the error estimate it could certify.
struct QuadratureError : LabError {
    double requested;
    double achieved;
    QuadratureError(const std::string& what, double req, double ach)
        : LabError(what + " (requested " + std::to_string(req) +
                   ", achieved " + std::to_string(ach) + ")"),
          requested(req), achieved(ach) {}
};

// Gram matrix not factorizable even after one jitter retry.
struct ConditioningError : LabError {
    using LabError::LabError;
};

// Nonlinear inner iteration of the time stepper failed at `step_index`.
struct ConvergenceError : LabError {
    int step_index;
    ConvergenceError(const std::string& what, int step)
        : LabError(what + " at step " + std::to_string(step)), step_index(step) {}
};

// Evaluation or inversion outside the representable range.
struct DomainError : LabError {
    using LabError::LabError;
};

// Density formula hit a non-positive variance functional.
struct DensityUndefinedError : LabError {
    using LabError::LabError;
};

}  // namespace fbsde
