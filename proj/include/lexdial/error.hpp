#pragma once

#include <stdexcept>
#include <string>

namespace lexdial {

/// Raised for bad input data, violated preconditions and unusable
/// configuration. The CLI maps it to exit code 1; anything else is treated as
/// an internal failure.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lexdial
