#pragma once

#include <stdexcept>
#include <string>

namespace crw {

/// Bad arguments or configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input data (CLI exit code 3).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical solver failed to bracket or converge (CLI exit code 4).
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double best_residual = -1.0)
        : std::runtime_error(what), best_residual_(best_residual) {}

    double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

/// Problem size exceeds what an exact method supports.
class CapacityError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Inputs carry no information for the requested computation,
/// e.g. every effect size is zero. Callers usually fall back to unit weights.
class DegenerateInput : public DataError {
public:
    using DataError::DataError;
};

} // namespace crw
