#pragma once

#include <stdexcept>
#include <string>

namespace fingersim {

// Base class for all library errors.  Each subclass maps to one process exit
// code so the CLI can report failures uniformly (see cli documentation).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed configuration: unknown keys, missing required fields, values of
// the wrong type.  Exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Structurally valid input that violates a domain constraint (negative
// stiffness, non-finite sample, out-of-band temperature, ...).  Exit code 2.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Numerical failure: non-positive-definite matrix after jitter escalation,
// diverging integration, out-of-range inverse trig argument.  Exit code 3.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Filesystem / serialization failure.  Exit code 4.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Exit code the CLI uses for an exception class.
int exit_code_for(const Error& e) noexcept;

inline int exit_code_for(const Error& e) noexcept {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
    if (dynamic_cast<const ValidationError*>(&e) != nullptr) return 2;
    if (dynamic_cast<const NumericError*>(&e) != nullptr) return 3;
    if (dynamic_cast<const IoError*>(&e) != nullptr) return 4;
    return 3;
}

}  // namespace fingersim
