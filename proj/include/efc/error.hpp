#pragma once

#include <stdexcept>
#include <string>

namespace efc {

// Base for everything this library throws.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input data or mathematical precondition violated (CLI exit status 1).
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what) {}
};

// Bad configuration: unknown profile, malformed flags or spec files (exit 2).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

// Filesystem or serialization failure (exit 2).
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace efc
