#pragma once

#include <stdexcept>
#include <string>

namespace ltm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter set violates a model invariant (non-positive volume, bad fraction, ...).
class InvalidConfig : public Error {
public:
    using Error::Error;
};

/// An argument outside the physical domain of an operation (negative photon number, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The stationary linear system is singular (e.g. every rate is zero).
class DegenerateConfig : public Error {
public:
    using Error::Error;
};

/// An iterative search ran out of iterations. Carries the last bracket.
class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, double lo, double hi)
        : Error(what + " (last bracket [" + std::to_string(lo) + ", " + std::to_string(hi) + "])"),
          lo_(lo), hi_(hi) {}

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

/// No pump rate in the searched range reaches the lasing threshold.
class NotLasable : public Error {
public:
    using Error::Error;
};

/// The laser is dark where an output was required (d.c. or a.c. sensing below threshold).
class NoOutput : public Error {
public:
    using Error::Error;
};

/// Step-size underflow or an out-of-range state in the stiff integrator.
class StiffnessFailure : public Error {
public:
    StiffnessFailure(const std::string& what, double t) : Error(what + " at t=" + std::to_string(t)), t_(t) {}
    double time() const noexcept { return t_; }

private:
    double t_;
};

/// Step response requested between two identical stationary states.
class DegenerateStep : public Error {
public:
    using Error::Error;
};

/// Malformed user input: config files, parameter paths, sweep specifications.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace ltm
