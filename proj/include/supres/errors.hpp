// SPDX-License-Identifier: MIT
#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace supres {

/// Argument outside the reachable (price, regime) domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed configuration or simulation settings.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class NumericalFailure {
    IntegrationFailure,
    NonMonotoneSolution,
    SingularNormalization,
    SingularSystem,
    DegenerateDenominator,
    NoSolution,
};

std::string_view to_string(NumericalFailure kind) noexcept;

/// A solver could not produce a trustworthy result.
///
/// `detail` carries a failure-specific number (condition estimate for
/// SingularSystem, the offending denominator for DegenerateDenominator,
/// the price where integration stopped, ...). NaN when not applicable.
class NumericalError : public std::runtime_error {
public:
    NumericalError(NumericalFailure kind, const std::string& what, double detail = std::numeric_limits<double>::quiet_NaN())
        : std::runtime_error(what), kind_(kind), detail_(detail) {}

    NumericalFailure kind() const noexcept { return kind_; }
    double detail() const noexcept { return detail_; }

private:
    NumericalFailure kind_;
    double detail_;
};

}  // namespace supres
