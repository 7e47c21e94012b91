#pragma once

#include <stdexcept>
#include <string>

namespace bkt {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad configuration or argument combination (maps to CLI exit 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File could not be read or written (CLI exit 3).
class IoError : public Error {
public:
    using Error::Error;
};

/// Input data or document does not match the expected schema (CLI exit 4).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A parsed dataset contained no usable rows (CLI exit 4).
class EmptyDatasetError : public SchemaError {
public:
    using SchemaError::SchemaError;
};

/// A probability computation collapsed to zero: the observation is
/// impossible under the current parameters (CLI exit 5).
class DegeneracyError : public Error {
public:
    using Error::Error;
};

} // namespace bkt
