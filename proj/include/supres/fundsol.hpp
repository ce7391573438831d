// SPDX-License-Identifier: MIT
//
// Increasing/decreasing solutions of the discounted generator equation
//
//     ½σ²(x) f''(x) + μ(x) f'(x) − r f(x) = 0
//
// in closed form for lognormal coefficients (power functions) and by
// shooting plus dense quintic Hermite interpolation for general ones.
#pragma once

#include "supres/model.hpp"

#include <cstddef>
#include <memory>
#include <vector>

namespace supres {

struct Interval {
    double lo;
    double hi;
};

/// Roots of ½σ²t² + (μ − ½σ²)t − r = 0, alpha > 0 > beta.
struct LognormalRoots {
    double alpha;
    double beta;
};

/// Requires sigma2 > 0 and r > 0 (throws std::invalid_argument otherwise).
LognormalRoots lognormal_roots(double sigma2, double mu, double r);

/// Dense solution table: value, derivative and second derivative at each node.
struct SolutionTable {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> dy;
    std::vector<double> d2y;
};

/// One member of a fundamental pair. Cheap to copy; tables are shared.
class FundamentalSolution {
public:
    /// c1·(x/x0)^p1 + c2·(x/x0)^p2, defined on (0, inf).
    static FundamentalSolution power_sum(double x0, double c1, double p1, double c2, double p2);
    /// scale · (quintic Hermite interpolant of `table`).
    static FundamentalSolution tabulated(std::shared_ptr<const SolutionTable> table, double scale);

    double value(double x) const;
    double derivative(double x) const;
    /// Analytic for power sums; the interpolant's own second derivative otherwise.
    double second_derivative(double x) const;

    FundamentalSolution scaled(double s) const;
    Interval domain() const;
    bool closed_form() const noexcept { return table_ == nullptr; }
    const SolutionTable* table() const noexcept { return table_.get(); }

private:
    FundamentalSolution() = default;

    // closed form
    double x0_ = 1.0;
    double c1_ = 0.0, p1_ = 0.0, c2_ = 0.0, p2_ = 0.0;
    // tabulated
    std::shared_ptr<const SolutionTable> table_;
    double scale_ = 1.0;
};

/// phi increasing, psi decreasing, both solving the same equation.
///
/// Normalization is interval-anchored: phi(a) = 0, phi(b) = 1,
/// psi(a) = 1, psi(b) = 0 where (a, b) = anchors. `domain` may extend
/// beyond the anchors.
struct FundamentalPair {
    FundamentalSolution phi;
    FundamentalSolution psi;
    Interval anchors;
    Interval domain;
};

/// Exact pair from the lognormal roots. Throws NumericalError(SingularNormalization)
/// if the 2×2 anchor system is singular.
FundamentalPair pair_closed_form(const Lognormal& dyn, double r, Interval anchors);

struct NumericOptions {
    double rtol = 1e-12;
    double atol = 1e-14;
    double max_log_step = 2e-3;  // node spacing in log(x)
    double tol_ode = 1e-8;       // relative residual budget checked after construction
};

/// Shooting from each anchor (y = 0, |y'| = 1), integrated over `domain`
/// with adaptive Dormand–Prince steps and normalized at the opposite anchor.
/// Works for any coefficient variant; lognormal input exercises the same path.
///
/// Throws NumericalError with IntegrationFailure or NonMonotoneSolution.
FundamentalPair pair_numeric(const DynamicsSpec& dyn, double r, Interval anchors, Interval domain,
                             const NumericOptions& opts = {});

/// Relative ODE residual |½σ²f'' + μf' − rf| / (½σ²|f''| + |μf'| + r|f|) at x.
/// For tabulated members f'' is a Richardson-extrapolated central difference of f'.
double relative_ode_residual(const DynamicsSpec& dyn, double r, const FundamentalSolution& f, double x);

/// Max of relative_ode_residual over n geometric points of [where.lo, where.hi].
/// For tabulated members the points are cell midpoints.
double max_relative_ode_residual(const DynamicsSpec& dyn, double r, const FundamentalSolution& f,
                                 Interval where, std::size_t n = 1000);

/// Wronskian phi'psi − phi psi' at x.
double wronskian(const FundamentalPair& pair, double x);

struct FundsolOptions {
    NumericOptions numeric;
    double floor_rel = 1e-8;    // negative-regime floor ε₀ = floor_rel·H for numeric members
    double far_factor = 1e4;    // numeric "infinity" for the decaying positive member, in units of M
};

/// Everything the selling and buying solvers evaluate.
///
/// Value coefficients (A₋, B₋, A₊, B₊) weigh (phi_minus, neg.psi, pos.phi, pos.psi).
struct Fundamentals {
    FundamentalPair pos;               // anchors (L, M)
    FundamentalPair neg;               // anchors (L, H), evaluable down to `floor`
    FundamentalSolution phi_minus;     // negative regime: 0 at the origin, 1 at H
    FundamentalSolution psi_pos_inf;   // positive regime: 1 at L, vanishing as x -> inf
    double floor = 0.0;                // 0 for closed forms
};

Fundamentals build_fundamentals(const Model& model, const FundsolOptions& opts = {});

/// Discounted hitting functionals.
///   chi(x)       = E_{x,+}[e^{−rτ} 1{exit (L,M) at M}]
///   delta(x)     = E_{x,+}[e^{−rτ} 1{exit (L,M) at L}]
///   phi_minus(x) = E_{x,−}[e^{−rτ_H}]
struct HitFunctionals {
    FundamentalSolution chi;
    FundamentalSolution delta;
    FundamentalSolution phi_minus;
};

HitFunctionals hit_functionals(const Model& model, const Fundamentals& funds);

}  // namespace supres
