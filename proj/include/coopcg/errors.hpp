// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace coopcg {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not match.
struct DimensionError : Error {
    using Error::Error;
};

/// A pivot vanished (exactly in rational mode, below the pivot floor in
/// float mode).  Signals rank degeneracy of the generating block.
struct SingularMatrixError : Error {
    using Error::Error;
};

/// A quadratic form that must be positive came out nonpositive beyond
/// round-off tolerance.
struct SpdViolationError : Error {
    using Error::Error;
};

/// Float-mode breakdown with no exact-arithmetic counterpart (e.g. all
/// agents degenerate while the residual is still above tolerance).
struct NumericalBreakdownError : Error {
    using Error::Error;
};

/// Malformed input file (Matrix Market, config, CSV).
struct ParseError : Error {
    using Error::Error;
};

} // namespace coopcg
