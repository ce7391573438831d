// SPDX-License-Identifier: MIT
//
// Two-regime price model with hysteretic switching at the levels L < H and a
// profit-taking cap M >= H.
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace supres {

enum class Regime { Positive, Negative };

/// "+" / "-"
std::string_view to_string(Regime f) noexcept;
Regime parse_regime(std::string_view text);

/// Polynomial pieces in powers of x on contiguous intervals.
///
/// Pieces must tile [lo_0, hi_n] without gaps. Outside that range the end
/// pieces are extended, so the function is defined for every x > 0.
class PiecewisePolynomial {
public:
    struct Piece {
        double lo;
        double hi;
        std::vector<double> coeffs;  // coeffs[k] multiplies x^k
    };

    PiecewisePolynomial() = default;
    explicit PiecewisePolynomial(std::vector<Piece> pieces);

    /// Linear interpolant through (xs[i], ys[i]); xs strictly increasing.
    static PiecewisePolynomial linear_interpolant(const std::vector<double>& xs,
                                                  const std::vector<double>& ys);
    static PiecewisePolynomial constant(double c, double lo, double hi);

    double operator()(double x) const;
    double derivative(double x) const;

    /// Largest |left - right| mismatch over interior knots, relative to max(1, |value|).
    double max_knot_jump() const;

    const std::vector<Piece>& pieces() const noexcept { return pieces_; }

private:
    const Piece& piece_for(double x) const;
    std::vector<Piece> pieces_;
};

/// Geometric Brownian dynamics: drift mu_rate * x, volatility sigma_rate * x.
struct Lognormal {
    double mu_rate;
    double sigma_rate;
};

/// Price-level coefficient functions (drift in price/time, volatility in price/sqrt(time)).
/// Zero is treated as absorbing.
struct General {
    PiecewisePolynomial mu;
    PiecewisePolynomial sigma;
};

using DynamicsSpec = std::variant<Lognormal, General>;

struct ModelSpec {
    double L = 0.0;
    double H = 0.0;
    double M = 0.0;
    double r = 0.0;
    DynamicsSpec pos = Lognormal{0.0, 0.0};
    DynamicsSpec neg = Lognormal{0.0, 0.0};

    const DynamicsSpec& dynamics(Regime f) const noexcept {
        return f == Regime::Positive ? pos : neg;
    }
};

struct Coefficients {
    double drift;
    double volatility;
};

Coefficients coefficients(const DynamicsSpec& dyn, double x);
Coefficients coefficients(const ModelSpec& spec, Regime f, double x);

inline bool is_lognormal(const DynamicsSpec& dyn) noexcept {
    return std::holds_alternative<Lognormal>(dyn);
}

enum class ViolationCode {
    LevelOrderViolation,
    DriftSandwichViolation,
    NonpositiveVolatility,
    NonpositiveRate,
    DiscontinuousCoefficient,
};

std::string_view to_string(ViolationCode code) noexcept;

struct Violation {
    ViolationCode code;
    std::string message;
    std::optional<double> at;  // offending price, when there is one
};

/// Every invariant a model must satisfy before the analytic solvers accept it.
/// General coefficients are checked on `grid_n` equally spaced points of (0, M].
std::vector<Violation> find_violations(const ModelSpec& spec, std::size_t grid_n = 10000);

class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

/// A ModelSpec that passed validation. Immutable.
class Model {
public:
    /// Throws ValidationError listing every violated invariant.
    static Model validate(ModelSpec spec, std::size_t grid_n = 10000);

    const ModelSpec& spec() const noexcept { return spec_; }
    double L() const noexcept { return spec_.L; }
    double H() const noexcept { return spec_.H; }
    double M() const noexcept { return spec_.M; }
    double r() const noexcept { return spec_.r; }
    const DynamicsSpec& dynamics(Regime f) const noexcept { return spec_.dynamics(f); }
    bool lognormal() const noexcept { return is_lognormal(spec_.pos) && is_lognormal(spec_.neg); }

private:
    explicit Model(ModelSpec spec) : spec_(std::move(spec)) {}
    ModelSpec spec_;
};

}  // namespace supres
