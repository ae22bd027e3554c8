#pragma once

#include <stdexcept>
#include <string>

namespace saten {

/// Shape or dimension mismatch between tensors/vectors.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument value (epsilon < 0, k out of range, ...).
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Bad input data (out-of-range token id, NaN loss, ...).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// No factorization with the requested number of factors exists.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed on-disk artifact (manifest, blob, token file).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid compression configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace saten
