#pragma once

#include <stdexcept>
#include <string>

namespace lbo {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConstantSeriesError : Error {
  using Error::Error;
};
struct SeriesTooShortError : Error {
  using Error::Error;
};
struct EmptySplitError : Error {
  using Error::Error;
};
struct LengthMismatchError : Error {
  using Error::Error;
};
struct EmptyError : Error {
  using Error::Error;
};
struct ShapeMismatchError : Error {
  using Error::Error;
};
struct ConfigInvalidError : Error {
  using Error::Error;
};
struct TrainingFailedError : Error {
  using Error::Error;
};
struct DegenerateFitError : Error {
  using Error::Error;
};
struct NoDelayFoundError : Error {
  using Error::Error;
};
struct ZeroMeanDisplacementError : Error {
  using Error::Error;
};
struct RatioNotFoundError : Error {
  using Error::Error;
};
struct LabelMissingError : Error {
  using Error::Error;
};

/// Filesystem / file-format problems (CLI maps these to exit code 3 / 5).
struct IoError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};

}  // namespace lbo
