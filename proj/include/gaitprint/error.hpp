#pragma once

#include <stdexcept>
#include <string>

namespace gaitprint {

/// Invalid configuration or parameter values. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable, malformed or inconsistent input data. Maps to exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a usable result. Exit code 4.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gaitprint
