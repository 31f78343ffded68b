// errors.hpp: exception hierarchy shared by all lepkit modules

#pragma once

#include <stdexcept>
#include <string>

namespace lep {

// Invalid user-supplied parameters or configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed to meet its contract (non-convergence,
// missing bracket, non-physical intermediate state, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An internal identity that must hold by construction was violated.
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace lep
