#pragma once

#include <stdexcept>
#include <string>

namespace cpa {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parameter outside the mathematical domain of a builder or formula.
struct DomainError : Error {
    using Error::Error;
};

struct NumericalInstability : Error {
    using Error::Error;
};

struct ContractViolation : Error {
    using Error::Error;
};

// Cumulant sign pattern does not fit the requested target family.
struct RegimeError : Error {
    using Error::Error;
};

struct InfeasibleMatch : Error {
    using Error::Error;
};

// A bound's hypotheses (H1/H2, theta < 1/2, ...) fail.
struct Inapplicable : Error {
    using Error::Error;
};

struct StateSpaceError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace cpa
