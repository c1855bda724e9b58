// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace riskit {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside its mathematical domain (negative distance, rho >= 1, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Shapes or sizes that do not fit together.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A matrix that had to be inverted or factored was not.
class SingularError : public Error {
public:
    using Error::Error;
};

// Scenario or config problems; the CLI maps these to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Numerical breakdown during a run; the CLI maps these to exit code 3.
class NumericError : public Error {
public:
    using Error::Error;
};

// Failure inside a multi-stage procedure. `stage` is 1-based.
class StageError : public NumericError {
public:
    StageError(int stage, const std::string& what)
        : NumericError("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
    int stage() const noexcept { return stage_; }

private:
    int stage_;
};

} // namespace riskit
