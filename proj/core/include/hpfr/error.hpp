#pragma once

#include <stdexcept>
#include <string>

namespace hpfr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required column is missing or a role refers to an unknown header name.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A cell could not be parsed as a finite number. Carries the 1-based data row.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row) : Error(what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// Structural problem in otherwise parseable data (duplicate times, ragged covariates).
class DataError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain of a function (e.g. t outside the basis interval).
class DomainError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// Factorization failed even after the bounded jitter escalation.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A posterior moment of the latent scale does not exist for the given family parameters.
class MomentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace hpfr
