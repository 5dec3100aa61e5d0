#pragma once

#include <stdexcept>
#include <string>

namespace bdsde {

/// Bad scenario/config input (unknown key, missing field, invalid value).
/// Maps to CLI exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Array length / dimension mismatch between coupled inputs.
class shape_error : public std::invalid_argument {
public:
    explicit shape_error(const std::string& msg) : std::invalid_argument(msg) {}
};

/// An operation was invoked in a mode its hypotheses exclude
/// (e.g. shift reduction with y-dependent g). Treated as a config error
/// by the CLI.
class mode_error : public std::runtime_error {
public:
    explicit mode_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Runtime numerical failure (blow-up, singular regression, root solve
/// failure). Maps to CLI exit code 3.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bdsde
