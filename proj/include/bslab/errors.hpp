#pragma once

#include <stdexcept>
#include <string>

namespace bslab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Existence condition of an explicit solution violated.
struct ComplianceError : Error {
    using Error::Error;
};

struct SimulationDiverged : Error {
    double time;
    SimulationDiverged(const std::string& what, double t) : Error(what), time(t) {}
};

struct ConvergenceError : Error {
    using Error::Error;
};

// H0 + eta <= 0 somewhere on the profile.
struct DepthViolation : Error {
    using Error::Error;
};

struct RangeError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    std::string key;
    ConfigError(const std::string& k, const std::string& what) : Error(k.empty() ? what : k + ": " + what), key(k) {}
};

// Leading-order amplitude undetermined (Q = 0 and f = 0).
struct VerticalBranch : Error {
    using Error::Error;
};

struct SizeMismatch : Error {
    using Error::Error;
};

}  // namespace bslab
