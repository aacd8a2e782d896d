#pragma once

#include <stdexcept>
#include <string>

namespace ssod {

/// Base class for every error raised by the label engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite coordinates or an extent below the minimum.
class InvalidBoxError : public Error {
public:
    using Error::Error;
};

/// A covariance that is not symmetric positive semi-definite.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed annotation text or a quadrilateral that is not a rectangle.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A JSON record or document that violates its schema. The message carries
/// the path of the offending field.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Out-of-range or unknown configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Percentile requested over an empty score group.
class EmptyGroupError : public Error {
public:
    using Error::Error;
};

}  // namespace ssod
