#pragma once

#include <stdexcept>
#include <string>

namespace bcut {

// Bad inputs: preconditions, malformed configs, single-class datasets.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class OutOfWorkspace : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An iterative solver stopped before reaching its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

// A trial could not be completed (IK failure while the tip was in pulp).
class TrialAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace bcut
