// SPDX-License-Identifier: MIT
//
// Optimal buying: U(x, f) = sup_τ E_{x,f}[e^{−rτ} g(S_τ, F_τ)] with the
// gain g(x, f) = v(x, f) − x of holding the share under the optimal sale.
// Purchase happens in the positive regime at or below a threshold B that
// maximizes g(·, +)/psi₊.
#pragma once

#include "supres/fundsol.hpp"
#include "supres/mc.hpp"
#include "supres/sell.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace supres {

/// g(x, f) = v(x, f) − x. Throws DomainError outside the reachable set.
double gain(const SellSolution& sol, double x, Regime f);
double gain_derivative(const SellSolution& sol, double x, Regime f);

/// Which decreasing positive-regime solution scales the waiting value.
///   DecayAtInfinity: psi₊(L) = 1, psi₊ → 0 as x → ∞. The discounted time
///                    to fall back to B when prices may rise past M.
///   AnchoredAtCap:   psi₊(L) = 1, psi₊(M) = 0. Waiting forfeits the
///                    purchase once the price reaches M.
enum class PsiNormalization { DecayAtInfinity, AnchoredAtCap };

std::string_view to_string(PsiNormalization n) noexcept;
PsiNormalization parse_psi_normalization(std::string_view text);

struct BuyOptions {
    std::size_t grid_n = 2000;
    double eps_rel = 1e-6;   // AnchoredAtCap: ratio grid stops at M − eps_rel·(M − L)
    double tie_rel = 1e-12;  // relative tolerance for leftmost tie-breaking
    PsiNormalization normalization = PsiNormalization::DecayAtInfinity;
};

struct RatioSample {
    double x;
    double rho;
};

struct RatioMax {
    double x;
    double value;
    std::vector<RatioSample> samples;
};

/// argmax of num/den over [lo, hi]: grid scan with leftmost ties, then a
/// golden-section polish that is kept only if it strictly improves.
RatioMax maximize_ratio(const std::function<double(double)>& num, const std::function<double(double)>& den,
                        double lo, double hi, std::size_t grid_n, double tie_rel = 1e-12);

class BuySolution {
public:
    double B() const noexcept { return B_; }
    double kappa() const noexcept { return kappa_; }  // g(B, +)/psi₊(B)
    PsiNormalization normalization() const noexcept { return norm_; }
    const std::vector<RatioSample>& rho_samples() const noexcept { return rho_samples_; }
    /// AnchoredAtCap only: g'(M,+)/psi₊'(M), the 0/0 limit of the ratio at M. NaN otherwise.
    double rho_limit_at_cap() const noexcept { return rho_cap_; }
    /// |u'(B⁻, +) − u'(B⁺, +)|; 0 when B = L.
    double derivative_mismatch() const;

    double psi(double x) const;
    double rho(double x) const;

    /// u(x, +) on [L, M]; u(x, −) on (0, H].
    double value(double x, Regime f) const;
    double derivative(double x, Regime f) const;

    const SellSolution& sell() const noexcept { return sell_; }

private:
    friend BuySolution find_B(const SellSolution&, const BuyOptions&);
    BuySolution(SellSolution sell, FundamentalSolution psi, PsiNormalization norm)
        : sell_(std::move(sell)), psi_(std::move(psi)), norm_(norm) {}

    SellSolution sell_;
    FundamentalSolution psi_;
    PsiNormalization norm_;
    double B_ = 0.0;
    double kappa_ = 0.0;
    double rho_cap_ = 0.0;
    std::vector<RatioSample> rho_samples_;
};

BuySolution find_B(const SellSolution& sell, const BuyOptions& opts = {});

double buy_value(const BuySolution& sol, double x, Regime f);

/// The simulation counterpart of `sol`: buy when F = + and S ≤ B. Gains
/// above M are zero (the share would be sold at once).
BuyAtThreshold buy_rule(const BuySolution& sol);

}  // namespace supres
