#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pmp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct SingularMatrixError : Error {
    using Error::Error;
};

/// Iterative estimate did not reach the requested tolerance; carries the
/// last estimate so callers can decide whether it is still usable.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double estimate, std::size_t iterations)
        : Error(what), last_estimate(estimate), iterations(iterations) {}
    double last_estimate;
    std::size_t iterations;
};

struct DivergenceError : Error {
    DivergenceError(const std::string& what, std::size_t iteration)
        : Error(what), iteration(iteration) {}
    std::size_t iteration;
};

struct DegenerateFrameError : Error {
    using Error::Error;
};

struct StatisticsError : Error {
    using Error::Error;
};

struct NotBracketedError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    ConfigError(const std::string& field, const std::string& what)
        : Error("config field '" + field + "': " + what), field(field) {}
    std::string field;
};

}  // namespace pmp
