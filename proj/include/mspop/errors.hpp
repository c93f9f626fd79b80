#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mspop {

// Base class for everything thrown by the library.  The CLI maps these to
// exit codes: validation/config errors -> 1, numerical failures -> 2,
// I/O failures -> 3.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Model or configuration rejected.  Carries the full list of violations so
// callers can report all problems at once instead of one per run.
struct ValidationError : Error {
    std::vector<std::string> violations;
    explicit ValidationError(std::vector<std::string> v)
        : Error(join(v)), violations(std::move(v)) {}

  private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "model validation failed:";
        for (const auto& m : v) s += "\n  - " + m;
        return s;
    }
};

struct ConfigError : Error {
    using Error::Error;
};

// Numerical failures (exit code 2).
struct NumericError : Error {
    using Error::Error;
};

// A characteristic curve left the admissible region before reaching the
// requested time offset.
struct LeftDomain : NumericError {
    int component;     // index of the offending coordinate, -1 for size
    double theta_exit; // offset at which the exit was detected
    LeftDomain(int comp, double theta, const std::string& what)
        : NumericError(what), component(comp), theta_exit(theta) {}
};

struct NotConverged : NumericError {
    using NumericError::NumericError;
};

struct NoBracket : NumericError {
    using NumericError::NumericError;
};

struct PowerIterationStalled : NotConverged {
    using NotConverged::NotConverged;
};

struct DivergentTransform : NumericError {
    using NumericError::NumericError;
};

struct TimeNotSampled : Error {
    using Error::Error;
};

struct InsufficientData : Error {
    using Error::Error;
};

struct PopulationExplosion : NumericError {
    using NumericError::NumericError;
};

// Argument outside an operation's admissible range (wrong branch of the
// density formula, point outside a lattice, age past the horizon, ...).
struct OutOfRange : Error {
    using Error::Error;
};

// Division hazard is an atom in age; it has no pointwise rate.
struct DiracHazardNotPointwise : Error {
    using Error::Error;
};

// The requested growth time would push the size coordinate past x_M.
struct ExceedsMaxSize : OutOfRange {
    using OutOfRange::OutOfRange;
};

// Wrong side of the t = a line for the requested branch of the density.
struct WrongBranch : OutOfRange {
    using OutOfRange::OutOfRange;
};

// Birth history not available at the requested time.
struct BirthFunctionUndefined : OutOfRange {
    using OutOfRange::OutOfRange;
};

// State is not in the reproductive region, so no daughter is defined.
struct NotReproductive : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace mspop
