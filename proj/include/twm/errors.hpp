#pragma once

#include <stdexcept>
#include <string>

namespace twm {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pool has no value at oracle prices (p.R == 0), weights undefined.
class AllReservesZero : public Error {
public:
    using Error::Error;
};

/// 1 + F <= 0 at the evaluation point: the dilution factor is meaningless.
class DegenerateDiscount : public Error {
public:
    using Error::Error;
};

/// Finite-difference step would push a price out of the positive orthant.
class StepTooLarge : public Error {
public:
    using Error::Error;
};

/// A reserve change would drive some reserve negative.
class InfeasibleDelta : public Error {
public:
    using Error::Error;
};

/// A gradient kink lies on a quadrature segment and refinement is disabled.
class QuadratureAcrossKink : public Error {
public:
    using Error::Error;
};

/// Witness search exhausted its doubling or grid budget without a verdict.
class SearchBudgetExceeded : public Error {
public:
    using Error::Error;
};

/// Sampling found a point where the boundedness premise (F <= 1) fails.
class PremiseFailure : public Error {
public:
    using Error::Error;
};

/// No state with F = 0 could be found under the requested reading.
class NoZeroState : public Error {
public:
    using Error::Error;
};

/// Scenario file is malformed; message carries the offending key path.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& key_path, const std::string& what)
        : Error(key_path + ": " + what), key_path_(key_path) {}

    const std::string& key_path() const { return key_path_; }

private:
    std::string key_path_;
};

}  // namespace twm
