// SPDX-License-Identifier: MIT
#include "supres/model.hpp"

#include "supres/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace supres {

std::string_view to_string(Regime f) noexcept {
    return f == Regime::Positive ? "+" : "-";
}

Regime parse_regime(std::string_view text) {
    if (text == "+" || text == "pos" || text == "positive") return Regime::Positive;
    if (text == "-" || text == "neg" || text == "negative") return Regime::Negative;
    throw ConfigError("unknown regime '" + std::string(text) + "' (expected \"+\" or \"-\")");
}

std::string_view to_string(NumericalFailure kind) noexcept {
    switch (kind) {
        case NumericalFailure::IntegrationFailure: return "IntegrationFailure";
        case NumericalFailure::NonMonotoneSolution: return "NonMonotoneSolution";
        case NumericalFailure::SingularNormalization: return "SingularNormalization";
        case NumericalFailure::SingularSystem: return "SingularSystem";
        case NumericalFailure::DegenerateDenominator: return "DegenerateDenominator";
        case NumericalFailure::NoSolution: return "NoSolution";
    }
    return "NumericalFailure";
}

// ---------------------------------------------------------------------------
// PiecewisePolynomial

PiecewisePolynomial::PiecewisePolynomial(std::vector<Piece> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw ConfigError("piecewise polynomial needs at least one piece");
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        const auto& p = pieces_[i];
        if (!(p.lo < p.hi)) throw ConfigError("piecewise polynomial piece has lo >= hi");
        if (p.coeffs.empty()) throw ConfigError("piecewise polynomial piece has no coefficients");
        if (i > 0 && pieces_[i - 1].hi != p.lo)
            throw ConfigError("piecewise polynomial pieces must be contiguous");
    }
}

PiecewisePolynomial PiecewisePolynomial::linear_interpolant(const std::vector<double>& xs,
                                                            const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw ConfigError("linear interpolant needs at least two (x, y) points");
    std::vector<Piece> pieces;
    pieces.reserve(xs.size() - 1);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        pieces.push_back({xs[i], xs[i + 1], {ys[i] - slope * xs[i], slope}});
    }
    return PiecewisePolynomial(std::move(pieces));
}

PiecewisePolynomial PiecewisePolynomial::constant(double c, double lo, double hi) {
    return PiecewisePolynomial({Piece{lo, hi, {c}}});
}

const PiecewisePolynomial::Piece& PiecewisePolynomial::piece_for(double x) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), x,
                               [](double v, const Piece& p) { return v < p.hi; });
    if (it == pieces_.end()) return pieces_.back();
    return *it;
}

namespace {

double horner(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
}

double horner_derivative(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * c[k];
    return acc;
}

}  // namespace

double PiecewisePolynomial::operator()(double x) const {
    return horner(piece_for(x).coeffs, x);
}

double PiecewisePolynomial::derivative(double x) const {
    return horner_derivative(piece_for(x).coeffs, x);
}

double PiecewisePolynomial::max_knot_jump() const {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < pieces_.size(); ++i) {
        const double k = pieces_[i].hi;
        const double left = horner(pieces_[i].coeffs, k);
        const double right = horner(pieces_[i + 1].coeffs, k);
        worst = std::max(worst, std::abs(left - right) / std::max(1.0, std::abs(left)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// coefficients

Coefficients coefficients(const DynamicsSpec& dyn, double x) {
    if (!(x > 0.0)) throw DomainError("coefficients: price must be positive");
    if (const auto* ln = std::get_if<Lognormal>(&dyn))
        return {ln->mu_rate * x, ln->sigma_rate * x};
    const auto& gen = std::get<General>(dyn);
    return {gen.mu(x), gen.sigma(x)};
}

Coefficients coefficients(const ModelSpec& spec, Regime f, double x) {
    return coefficients(spec.dynamics(f), x);
}

// ---------------------------------------------------------------------------
// validation

std::string_view to_string(ViolationCode code) noexcept {
    switch (code) {
        case ViolationCode::LevelOrderViolation: return "LevelOrderViolation";
        case ViolationCode::DriftSandwichViolation: return "DriftSandwichViolation";
        case ViolationCode::NonpositiveVolatility: return "NonpositiveVolatility";
        case ViolationCode::NonpositiveRate: return "NonpositiveRate";
        case ViolationCode::DiscontinuousCoefficient: return "DiscontinuousCoefficient";
    }
    return "Violation";
}

namespace {

constexpr double kKnotTolerance = 1e-9;

std::string describe(std::string_view what, double x) {
    std::ostringstream os;
    os.precision(17);
    os << what << " at x=" << x;
    return os.str();
}

void check_dynamics(const DynamicsSpec& dyn, Regime f, const ModelSpec& spec, std::size_t grid_n,
                    std::vector<Violation>& out) {
    const std::string tag = std::string(f == Regime::Positive ? "positive" : "negative") + " regime";
    const double r = spec.r;

    if (const auto* ln = std::get_if<Lognormal>(&dyn)) {
        if (!(ln->sigma_rate > 0.0))
            out.push_back({ViolationCode::NonpositiveVolatility, tag + ": sigma must be positive", {}});
        // The rate form of the sandwich; identical to the pointwise form for linear drift.
        if (f == Regime::Negative && ln->mu_rate > r)
            out.push_back({ViolationCode::DriftSandwichViolation,
                           tag + ": drift rate exceeds r (need mu_neg <= r)", spec.M});
        if (f == Regime::Positive && ln->mu_rate < r)
            out.push_back({ViolationCode::DriftSandwichViolation,
                           tag + ": drift rate below r (need mu_pos >= r)", spec.M});
        return;
    }

    const auto& gen = std::get<General>(dyn);
    if (gen.mu.max_knot_jump() > kKnotTolerance)
        out.push_back({ViolationCode::DiscontinuousCoefficient, tag + ": drift is discontinuous at a knot", {}});
    if (gen.sigma.max_knot_jump() > kKnotTolerance)
        out.push_back({ViolationCode::DiscontinuousCoefficient, tag + ": volatility is discontinuous at a knot", {}});

    bool vol_reported = false;
    bool drift_reported = false;
    const std::size_t n = std::max<std::size_t>(grid_n, 1);
    for (std::size_t i = 1; i <= n; ++i) {
        const double x = spec.M * static_cast<double>(i) / static_cast<double>(n);
        const double sig = gen.sigma(x);
        if (!vol_reported && !(sig > 0.0)) {
            out.push_back({ViolationCode::NonpositiveVolatility, describe(tag + ": volatility not positive", x), x});
            vol_reported = true;
        }
        const double gap = gen.mu(x) - r * x;
        const double slack = 1e-12 * (1.0 + std::abs(r * x));
        const bool bad = f == Regime::Positive ? gap < -slack : gap > slack;
        if (!drift_reported && bad) {
            out.push_back({ViolationCode::DriftSandwichViolation,
                           describe(tag + (f == Regime::Positive ? ": mu(x) < r x" : ": mu(x) > r x"), x), x});
            drift_reported = true;
        }
    }
}

}  // namespace

std::vector<Violation> find_violations(const ModelSpec& spec, std::size_t grid_n) {
    std::vector<Violation> out;
    if (!(spec.L > 0.0 && spec.L < spec.H && spec.H <= spec.M)) {
        std::ostringstream os;
        os << "levels must satisfy 0 < L < H <= M (got L=" << spec.L << ", H=" << spec.H
           << ", M=" << spec.M << ")";
        out.push_back({ViolationCode::LevelOrderViolation, os.str(), {}});
    }
    if (!(spec.r > 0.0))
        out.push_back({ViolationCode::NonpositiveRate, "interest rate r must be positive", {}});
    // The grid checks need a usable M.
    if (spec.M > 0.0 && std::isfinite(spec.M)) {
        check_dynamics(spec.pos, Regime::Positive, spec, grid_n, out);
        check_dynamics(spec.neg, Regime::Negative, spec, grid_n, out);
    }
    return out;
}

namespace {

std::string summarize(const std::vector<Violation>& v) {
    std::string s = "invalid model:";
    for (const auto& x : v) {
        s += " [";
        s += to_string(x.code);
        s += "] ";
        s += x.message;
        s += ';';
    }
    return s;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::invalid_argument(summarize(violations)), violations_(std::move(violations)) {}

Model Model::validate(ModelSpec spec, std::size_t grid_n) {
    auto violations = find_violations(spec, grid_n);
    if (!violations.empty()) throw ValidationError(std::move(violations));
    return Model(std::move(spec));
}

}  // namespace supres
