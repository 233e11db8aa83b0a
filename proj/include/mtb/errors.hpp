#pragma once

#include <stdexcept>
#include <string>

namespace mtb {

/// Malformed or non-finite inputs (empty samples, NaN entries, shape mismatch).
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Trim fraction out of range or trimming would discard every sample.
struct InvalidTrim : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Normal matrix is rank deficient (or nearly so) and a strict solve was requested.
struct SingularDesign : std::runtime_error {
    explicit SingularDesign(const std::string& msg, int instance = -1)
        : std::runtime_error(msg), instance_id(instance) {}
    int instance_id;  // -1 when not attributable to a particular task
};

/// Iterative solver ran out of sweeps; carries the final KKT residual.
struct ConvergenceFailure : std::runtime_error {
    ConvergenceFailure(const std::string& msg, double residual)
        : std::runtime_error(msg), kkt_residual(residual) {}
    double kkt_residual;
};

/// Inconsistent simulation or experiment configuration.
struct InvalidConfig : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace mtb
