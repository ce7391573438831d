// SPDX-License-Identifier: MIT
//
// Optimal selling: V(x, f) = sup_{τ ≤ τ_M} E_{x,f}[e^{−rτ} S_τ].
//
// The optimal rule sells at τ_M ∧ τ⁻_m̂ (cap M, or the negative-regime
// stop-loss m̂). For a fixed stop-loss level m the value is piecewise a
// combination of fundamental solutions fixed by four boundary conditions;
// m̂ is the level at which the negative-regime component pastes smoothly
// onto the identity.
#pragma once

#include "supres/fundsol.hpp"
#include "supres/model.hpp"

#include <cstddef>
#include <limits>
#include <memory>
#include <string_view>
#include <vector>

namespace supres {

/// C1: m̂ ∈ [L, H).  C2: m̂ ∈ (0, L).  C3: m̂ = 0 (never stop early).
enum class CaseTag { C1, C2, C3 };

std::string_view to_string(CaseTag tag) noexcept;
CaseTag parse_case(std::string_view text);

/// Weights on (phi_minus, neg.psi, pos.phi, pos.psi).
struct ValueCoefficients {
    double a_neg = 0.0;
    double b_neg = 0.0;
    double a_pos = 0.0;
    double b_pos = 0.0;
};

/// Branch whose boundary conditions describe stop-loss level m.
CaseTag branch_for(const Model& model, double m);

/// Solves the case's four boundary conditions at stop-loss level m.
///
///   C1: v(m,−)=m, v(H,−)=v(H,+), v(L,+)=L,      v(M,+)=M
///   C2: v(m,−)=m, v(H,−)=v(H,+), v(L,+)=v(L,−), v(M,+)=M
///   C3: B₋ = 0,   v(H,−)=v(H,+), v(L,+)=v(L,−), v(M,+)=M
///
/// Throws NumericalError(SingularSystem) with the condition estimate as detail.
ValueCoefficients assemble_candidate(const Model& model, const Fundamentals& funds, double m, CaseTag tag);

/// ∂v/∂x(m, −; m) − 1 for the candidate at level m.
double pasting_residual(const Model& model, const Fundamentals& funds, double m, CaseTag tag);

struct C3Value {
    ValueCoefficients coeffs;
    double denominator;  // 1 − phi_minus(L)·delta(H)
    double value_at_H;   // M·chi(H) / denominator
};

/// Never-stop-early value via the renewal identity at H.
/// Throws NumericalError(DegenerateDenominator) if the denominator is not positive.
C3Value case_c3_value(const Model& model, const Fundamentals& funds);

/// Value of the rule "sell at τ_M ∧ τ⁻_m" for a fixed m ∈ [0, H).
class StopLossValue {
public:
    StopLossValue(const Model& model, std::shared_ptr<const Fundamentals> funds, double m);
    /// Rebuild from stored coefficients (no solve).
    StopLossValue(const Model& model, std::shared_ptr<const Fundamentals> funds, double m, CaseTag tag,
                  ValueCoefficients coeffs);

    /// Domain: f = + requires x ∈ [L, M]; f = − requires x ∈ (0, H].
    double value(double x, Regime f) const;
    double derivative(double x, Regime f) const;
    double second_derivative(double x, Regime f) const;

    double m() const noexcept { return m_; }
    CaseTag branch() const noexcept { return tag_; }
    const ValueCoefficients& coeffs() const noexcept { return coeffs_; }
    const Model& model() const noexcept { return model_; }
    const Fundamentals& fundamentals() const noexcept { return *funds_; }
    std::shared_ptr<const Fundamentals> fundamentals_ptr() const noexcept { return funds_; }

private:
    void check_domain(double x, Regime f) const;

    Model model_;
    std::shared_ptr<const Fundamentals> funds_;
    double m_;
    CaseTag tag_;
    ValueCoefficients coeffs_;
};

struct SellOptions {
    std::size_t grid_n = 400;   // scan points per branch
    double tol_paste = 1e-9;
    double eps_rel = 1e-6;      // C1 scan stops at H − eps_rel·(H − L)
    double floor_rel = 1e-8;    // C2 scan starts at floor_rel·H
};

struct ResidualSample {
    double m;
    double residual;
};

struct SellDiagnostics {
    std::vector<ResidualSample> c1_scan;
    std::vector<ResidualSample> c2_scan;
    std::size_t root_count = 0;     // bracketing intervals on the chosen branch
    bool multiple_roots = false;    // more than one bracket; the largest root was taken
    double pasting_residual = std::numeric_limits<double>::quiet_NaN();
    double c3_denominator = std::numeric_limits<double>::quiet_NaN();
};

struct SellSolution {
    CaseTag case_tag;
    double m_hat;
    ValueCoefficients coeffs;
    StopLossValue value_fn;
    SellDiagnostics diagnostics;
};

/// Scans the C1 branch, then C2, falling back to C3.
SellSolution classify_and_solve(const Model& model, std::shared_ptr<const Fundamentals> funds,
                                const SellOptions& opts = {});
/// Builds closed-form or numeric fundamentals with defaults first.
SellSolution classify_and_solve(const Model& model, const SellOptions& opts = {});

/// v(x, f). Returns x in the stopped region (f = −, x < m̂).
double value_sell(const SellSolution& sol, double x, Regime f);
double value_sell_derivative(const SellSolution& sol, double x, Regime f);

}  // namespace supres
