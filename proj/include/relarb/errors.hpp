#pragma once

#include <stdexcept>
#include <string>

namespace relarb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration. The message names the offending key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure: non-finite state, weight-floor violation, vanishing generator.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A weight left the simplex tolerance or fell below a required floor.
class SimplexError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// The market cannot satisfy gamma*_mu > epsilon > 0 (e.g. zero volatility).
class HypothesisError : public Error {
public:
    using Error::Error;
};

/// Malformed input data (CSV rows, grids, report documents).
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace relarb
