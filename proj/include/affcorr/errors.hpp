#pragma once

#include <stdexcept>
#include <string>

namespace affcorr {

// Base class for all library errors. The CLI maps these to exit code 2;
// anything else (usage problems) exits with 1.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A precondition on an operation's inputs was violated.
class InvalidInput : public Error {
  public:
    using Error::Error;
};

// Tensor/vector dimensions do not line up.
class ShapeError : public Error {
  public:
    using Error::Error;
};

// A binary container (store, checkpoint, WAV) is malformed or truncated.
class FormatError : public Error {
  public:
    using Error::Error;
};

// A referenced record (id) is missing from a store or manifest.
class DataError : public Error {
  public:
    using Error::Error;
};

// An operation was called before the state it relies on exists.
class StateError : public Error {
  public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
  public:
    using Error::Error;
};

// No emotion label can be derived (e.g. all tag counts zero).
class NoLabelError : public Error {
  public:
    using Error::Error;
};

} // namespace affcorr
