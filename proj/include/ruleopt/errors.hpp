#pragma once

#include <stdexcept>
#include <string>

namespace ruleopt {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two rules (or a rule and a universe) of different lengths were combined.
class UniverseMismatchError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (CSV, universe file, dataset hashes).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (CLI flags, config file, parameter ranges).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A planted rule could not be realized within the retry budget.
class InfeasiblePlantError : public Error {
public:
    using Error::Error;
};

/// GP covariance could not be factorized even after jitter escalation.
class IllConditionedError : public Error {
public:
    using Error::Error;
};

/// Exhaustive enumeration refused: universe larger than the configured cap.
class CapExceededError : public Error {
public:
    using Error::Error;
};

} // namespace ruleopt
