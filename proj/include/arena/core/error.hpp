#pragma once

#include <stdexcept>
#include <string>

namespace arena {

// Error taxonomy. Everything thrown by the library derives from Error so
// callers (and the CLI's --json-errors path) can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape disagreement; message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid scalar parameter (window=0, k<1, iters=0, ...).
struct ParamError : Error {
  using Error::Error;
};

// Degenerate numeric situation: fully masked softmax row, vanishing
// normalizer, NaN loss.
struct NumericError : Error {
  using Error::Error;
};

// Requested gradient w.r.t. a tensor the loss does not depend on.
struct GraphError : Error {
  using Error::Error;
};

// Malformed input text/bytes; message carries the position.
struct ParseError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Operation not defined for the given mechanism (e.g. span on kernel attention).
struct UnsupportedError : Error {
  using Error::Error;
};

}  // namespace arena
