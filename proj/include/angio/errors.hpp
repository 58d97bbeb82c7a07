#pragma once

#include <stdexcept>
#include <string>

namespace angio {

/// Invalid configuration or parameter set (usage-level failure).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: instability, CFL violation, non-finite state.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace angio
