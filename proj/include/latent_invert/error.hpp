#pragma once

#include <stdexcept>
#include <string>

namespace latent_invert {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Extents disagree with what an operation requires.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A NaN or Inf appeared, or an argument is outside its numeric domain.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or unsupported file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure (missing file, unwritable path).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace latent_invert
