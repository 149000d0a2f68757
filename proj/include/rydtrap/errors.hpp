#pragma once

#include <stdexcept>
#include <string>

namespace rydtrap {

/// Base of every error raised by the library. The CLI maps the three
/// families below onto its exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent user input (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical or physical failure inside a stage (exit code 3).
class PhysicsError : public Error {
public:
    using Error::Error;
};

/// File system / serialization failure (exit code 4).
class IoError : public Error {
public:
    using Error::Error;
};

class GeometryError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class SolverError : public PhysicsError {
public:
    SolverError(const std::string& what, double residual)
        : PhysicsError(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class CalibrationError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class OutOfDomainError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class RangeError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class BasisError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class TrackingError : public PhysicsError {
public:
    TrackingError(const std::string& what, double field, double theta)
        : PhysicsError(what), field_(field), theta_(theta) {}
    double field() const noexcept { return field_; }
    double theta() const noexcept { return theta_; }

private:
    double field_;
    double theta_;
};

class OptimizationError : public PhysicsError {
public:
    OptimizationError(const std::string& what, double best_residual)
        : PhysicsError(what), best_residual_(best_residual) {}
    double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

class IntegratorError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class UnstableTrapError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class EmptyEnsembleError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

}  // namespace rydtrap
