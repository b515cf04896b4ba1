#pragma once

#include <stdexcept>

namespace offopt {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: InvalidArgument -> 2, IoError -> 3, ParseError and
// ValidationError -> 4, NumericalFailure -> 5.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct ValidationError : Error {
  using Error::Error;
};

struct NumericalFailure : Error {
  using Error::Error;
};

}  // namespace offopt
