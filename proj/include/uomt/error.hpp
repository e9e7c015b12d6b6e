#pragma once

#include <stdexcept>
#include <string>

namespace uomt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Field shapes do not agree with the grid or graph they are used with.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid user-supplied data: negative densities, bad weights, malformed files.
class InputError : public Error {
public:
    using Error::Error;
};

/// Endpoint totals disagree, so the continuity constraint has no solution.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// An iterative method stopped before reaching its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double achieved)
        : Error(what + " (achieved residual " + std::to_string(achieved) + ")"),
          achieved_(achieved) {}

    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

} // namespace uomt
