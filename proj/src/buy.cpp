// SPDX-License-Identifier: MIT
#include "supres/buy.hpp"

#include "supres/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace supres {

double gain(const SellSolution& sol, double x, Regime f) {
    return value_sell(sol, x, f) - x;
}

double gain_derivative(const SellSolution& sol, double x, Regime f) {
    return value_sell_derivative(sol, x, f) - 1.0;
}

std::string_view to_string(PsiNormalization n) noexcept {
    return n == PsiNormalization::DecayAtInfinity ? "decay_at_infinity" : "anchored_at_cap";
}

PsiNormalization parse_psi_normalization(std::string_view text) {
    if (text == "decay_at_infinity") return PsiNormalization::DecayAtInfinity;
    if (text == "anchored_at_cap") return PsiNormalization::AnchoredAtCap;
    throw ConfigError("unknown psi normalization '" + std::string(text) +
                      "' (expected decay_at_infinity or anchored_at_cap)");
}

RatioMax maximize_ratio(const std::function<double(double)>& num, const std::function<double(double)>& den,
                        double lo, double hi, std::size_t grid_n, double tie_rel) {
    if (!(lo <= hi)) throw std::invalid_argument("maximize_ratio: need lo <= hi");
    if (grid_n < 2) throw ConfigError("ratio grid needs at least two points");
    auto ratio = [&](double x) { return num(x) / den(x); };

    RatioMax out{lo, -std::numeric_limits<double>::infinity(), {}};
    out.samples.reserve(grid_n);
    std::size_t best = 0;
    for (std::size_t i = 0; i < grid_n; ++i) {
        const double x = i + 1 == grid_n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_n - 1);
        const double v = ratio(x);
        out.samples.push_back({x, v});
        if (i == 0 || v > out.value + tie_rel * std::abs(out.value)) {
            out.value = v;
            best = i;
        }
    }
    out.x = out.samples[best].x;

    // Golden-section polish inside the neighbouring cells.
    const double a0 = out.samples[best == 0 ? 0 : best - 1].x;
    const double b0 = out.samples[std::min(best + 1, grid_n - 1)].x;
    const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = a0, b = b0;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = ratio(c), fd = ratio(d);
    for (int it = 0; it < 200 && b - a > 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(b)); ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = ratio(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = ratio(d);
        }
    }
    const double xr = fc >= fd ? c : d;
    const double vr = std::max(fc, fd);
    if (vr > out.value + tie_rel * std::abs(out.value)) {
        out.x = xr;
        out.value = vr;
    }
    return out;
}

BuySolution find_B(const SellSolution& sell, const BuyOptions& opts) {
    const Model& model = sell.value_fn.model();
    const Fundamentals& fs = sell.value_fn.fundamentals();
    const double L = model.L(), M = model.M();
    const bool at_cap = opts.normalization == PsiNormalization::AnchoredAtCap;

    BuySolution sol(sell, at_cap ? fs.pos.psi : fs.psi_pos_inf, opts.normalization);
    const double hi = at_cap ? M - opts.eps_rel * (M - L) : M;

    const auto best = maximize_ratio([&](double x) { return gain(sell, x, Regime::Positive); },
                                     [&](double x) { return sol.psi_.value(x); }, L, hi, opts.grid_n, opts.tie_rel);
    sol.B_ = best.x;
    sol.kappa_ = best.value;
    sol.rho_samples_ = best.samples;
    if (at_cap) {
        sol.rho_cap_ = gain_derivative(sell, M, Regime::Positive) / sol.psi_.derivative(M);
        sol.rho_samples_.push_back({M, sol.rho_cap_});
    } else {
        sol.rho_cap_ = std::numeric_limits<double>::quiet_NaN();
    }
    return sol;
}

double BuySolution::psi(double x) const {
    return psi_.value(x);
}

double BuySolution::rho(double x) const {
    return gain(sell_, x, Regime::Positive) / psi_.value(x);
}

double BuySolution::derivative_mismatch() const {
    const double L = sell_.value_fn.model().L();
    if (B_ <= L) return 0.0;
    return std::abs(gain_derivative(sell_, B_, Regime::Positive) - kappa_ * psi_.derivative(B_));
}

double BuySolution::value(double x, Regime f) const {
    const Model& model = sell_.value_fn.model();
    if (f == Regime::Negative) {
        if (!(x > 0.0) || x > model.H() * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "u(x,-) is defined on (0, H]; got x=" << x;
            throw DomainError(os.str());
        }
        const auto& fs = sell_.value_fn.fundamentals();
        const double uH = value(model.H(), Regime::Positive);
        if (fs.floor > 0.0 && x < fs.floor) return uH * fs.phi_minus.derivative(fs.floor) * x;
        return uH * fs.phi_minus.value(x);
    }
    if (x <= B_) return gain(sell_, x, Regime::Positive);
    if (x > model.M() * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "u(x,+) is defined on [L, M]; got x=" << x;
        throw DomainError(os.str());
    }
    return kappa_ * psi_.value(x);
}

double BuySolution::derivative(double x, Regime f) const {
    const Model& model = sell_.value_fn.model();
    if (f == Regime::Negative) {
        if (!(x > 0.0) || x > model.H() * (1.0 + 1e-12)) throw DomainError("u(x,-) is defined on (0, H]");
        const auto& fs = sell_.value_fn.fundamentals();
        const double uH = value(model.H(), Regime::Positive);
        if (fs.floor > 0.0 && x < fs.floor) return uH * fs.phi_minus.derivative(fs.floor);
        return uH * fs.phi_minus.derivative(x);
    }
    if (x <= B_) return gain_derivative(sell_, x, Regime::Positive);
    if (x > model.M() * (1.0 + 1e-12)) throw DomainError("u(x,+) is defined on [L, M]");
    return kappa_ * psi_.derivative(x);
}

double buy_value(const BuySolution& sol, double x, Regime f) {
    return sol.value(x, f);
}

BuyAtThreshold buy_rule(const BuySolution& sol) {
    const double M = sol.sell().value_fn.model().M();
    auto sell = std::make_shared<const SellSolution>(sol.sell());
    BuyAtThreshold rule;
    rule.B = sol.B();
    rule.forfeit_at_cap = sol.normalization() == PsiNormalization::AnchoredAtCap;
    rule.gain = [sell, M](double x, Regime f) {
        if (f == Regime::Positive && x >= M) return 0.0;
        return gain(*sell, x, f);
    };
    return rule;
}

}  // namespace supres
