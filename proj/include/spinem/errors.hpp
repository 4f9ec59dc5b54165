#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spinem {

// Invalid configuration or arguments. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input outside the domain where a formula is defined (probe inside the
// specimen, pattern off the detector, ...). CLI exit code 2.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Degenerate or non-convergent numerics. CLI exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Levenberg-Marquardt gave up; carries the last iterate for diagnostics.
class FitError : public NumericError {
public:
    FitError(const std::string& what, std::vector<double> last_params, int iterations)
        : NumericError(what), last_params_(std::move(last_params)), iterations_(iterations) {}

    const std::vector<double>& last_params() const noexcept { return last_params_; }
    int iterations() const noexcept { return iterations_; }

private:
    std::vector<double> last_params_;
    int iterations_;
};

// File or stream failure. CLI exit code 4.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace spinem
