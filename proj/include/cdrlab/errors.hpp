#pragma once

#include <stdexcept>
#include <string>

namespace cdrlab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration or parameter set. Maps to CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Not enough events (crossings, edges) for a statistical measurement.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// The loop reached a non-physical state, e.g. a non-positive VCO frequency.
class SimulationFault : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// The recovered clock never settled. Carries the drift seen over the last
/// detection window (UI per edge). Maps to CLI exit code 3.
class LockError : public Error {
public:
    LockError(const std::string& what, double drift_ui_per_edge)
        : Error(what), drift_(drift_ui_per_edge) {}
    double drift_ui_per_edge() const noexcept { return drift_; }

private:
    double drift_;
};

/// File system failure. Maps to CLI exit code 4.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cdrlab
