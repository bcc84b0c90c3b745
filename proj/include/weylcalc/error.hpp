#pragma once

#include <stdexcept>
#include <string>

namespace weylcalc {

/// Error raised by any engine operation whose precondition fails
/// (division by zero, singular Jacobian, malformed input, ...).
/// The CLI reports these per statement instead of aborting.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace weylcalc
