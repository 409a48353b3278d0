#pragma once

#include <stdexcept>

namespace prevmap {

// Base class for every error raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fewer observations than a fit requires.
struct DataTooShort : Error { using Error::Error; };
// Fewer than five nonzero values left after zero-dropping.
struct TooFewNonzero : Error { using Error::Error; };
struct ZeroVariance : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct EllipseOutOfBounds : Error { using Error::Error; };
struct QuadratureFailure : Error { using Error::Error; };
struct DegenerateAlternative : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct InvariantViolation : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };

}  // namespace prevmap
