#pragma once

#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <string>

namespace relaylab {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad profile, unsupported method/profile pair,
/// malformed config file. Maps to CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Round or relay index outside its valid range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Subset expansion requested for more factors than the term budget allows.
class ExpansionTooLarge : public Error {
public:
    explicit ExpansionTooLarge(std::size_t factors)
        : Error("expansion too large: " + std::to_string(factors) +
                " factors exceed the 2^30 term budget; use quad_1d on the product instead")
        , factors_(factors)
    {
    }
    std::size_t factors() const noexcept { return factors_; }

private:
    std::size_t factors_;
};

/// Numerical routine failed to reach its tolerance. Carries the best
/// estimate available. Maps to CLI exit code 3.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double best_estimate, double error_estimate)
        : Error(what), best_(best_estimate), err_(error_estimate)
    {
    }
    double best_estimate() const noexcept { return best_; }
    double error_estimate() const noexcept { return err_; }

private:
    double best_;
    double err_;
};

/// A channel realization the protocol cannot operate on (e.g. a relay
/// timer with zero min-gain).
class DegenerateChannel : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline bool debug_enabled()
{
    static const bool enabled = [] {
        const char* v = std::getenv("RELAYLAB_DEBUG");
        return v != nullptr && *v != '\0' && std::string(v) != "0";
    }();
    return enabled;
}

inline void debug_log(const std::string& msg)
{
    if (debug_enabled()) {
        std::clog << "[relaylab] " << msg << '\n';
    }
}

} // namespace detail
} // namespace relaylab
