// SPDX-License-Identifier: MIT
//
// Independent reference computations for lognormal models. Nothing here
// calls into the library: value functions are written in the raw power
// basis x^alpha, x^beta and the boundary systems are solved by plain
// Gaussian elimination.
#pragma once

#include "supres/model.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

inline supres::ModelSpec example1() {
    supres::ModelSpec s;
    s.L = 1.0;
    s.H = 2.0;
    s.M = 8.0;
    s.r = 0.02;
    s.pos = supres::Lognormal{0.04, std::sqrt(0.06)};
    s.neg = supres::Lognormal{0.005, std::sqrt(0.01)};
    return s;
}

inline supres::ModelSpec lognormal(double L, double H, double M, double r, double mu_p, double sig_p, double mu_m,
                                   double sig_m) {
    supres::ModelSpec s;
    s.L = L;
    s.H = H;
    s.M = M;
    s.r = r;
    s.pos = supres::Lognormal{mu_p, sig_p};
    s.neg = supres::Lognormal{mu_m, sig_m};
    return s;
}

/// Textbook quadratic formula for ½σ²t² + (μ − ½σ²)t − r = 0, larger root first.
inline std::pair<double, double> roots(double sigma2, double mu, double r) {
    const double a = 0.5 * sigma2, b = mu - 0.5 * sigma2, c = -r;
    const double disc = std::sqrt(b * b - 4 * a * c);
    return {(-b + disc) / (2 * a), (-b - disc) / (2 * a)};
}

template <std::size_t N>
std::array<double, N> gauss(std::array<std::array<double, N>, N> A, std::array<double, N> b) {
    for (std::size_t c = 0; c < N; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < N; ++r)
            if (std::abs(A[r][c]) > std::abs(A[p][c])) p = r;
        std::swap(A[c], A[p]);
        std::swap(b[c], b[p]);
        if (A[c][c] == 0.0) throw std::runtime_error("oracle: singular system");
        for (std::size_t r = c + 1; r < N; ++r) {
            const double f = A[r][c] / A[c][c];
            for (std::size_t k = c; k < N; ++k) A[r][k] -= f * A[c][k];
            b[r] -= f * b[c];
        }
    }
    std::array<double, N> x{};
    for (std::size_t i = N; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < N; ++k) s -= A[i][k] * x[k];
        x[i] = s / A[i][i];
    }
    return x;
}

/// Stop-loss value for a lognormal model in the raw power basis:
///   v(x,+) = P·x^a₊ + Q·x^b₊,   v(x,−) = R·x^a₋ + T·x^b₋  (T = 0 when m = 0).
struct PowerValue {
    double ap, bp, am, bm;  // exponents
    double P, Q, R, T;
    double m;

    double plus(double x) const { return P * std::pow(x, ap) + Q * std::pow(x, bp); }
    double minus(double x) const { return x < m ? x : R * std::pow(x, am) + T * std::pow(x, bm); }
    double dminus(double x) const {
        return x < m ? 1.0 : (R * am * std::pow(x, am - 1) + T * bm * std::pow(x, bm - 1));
    }
};

inline PowerValue stop_loss_value(const supres::ModelSpec& s, double m) {
    const auto& p = std::get<supres::Lognormal>(s.pos);
    const auto& n = std::get<supres::Lognormal>(s.neg);
    const auto [ap, bp] = roots(p.sigma_rate * p.sigma_rate, p.mu_rate, s.r);
    const auto [am, bm] = roots(n.sigma_rate * n.sigma_rate, n.mu_rate, s.r);
    const double L = s.L, H = s.H, M = s.M;
    auto pw = [](double x, double e) { return std::pow(x, e); };
    // Unknowns (P, Q, R, T).
    std::array<std::array<double, 4>, 4> A{};
    std::array<double, 4> b{};
    if (m > 0.0) {
        A[0] = {0, 0, pw(m, am), pw(m, bm)};
        b[0] = m;
    } else {
        A[0] = {0, 0, 0, 1};
        b[0] = 0;
    }
    A[1] = {-pw(H, ap), -pw(H, bp), pw(H, am), pw(H, bm)};
    if (m >= L) {
        A[2] = {pw(L, ap), pw(L, bp), 0, 0};
        b[2] = L;
    } else {
        A[2] = {pw(L, ap), pw(L, bp), -pw(L, am), -pw(L, bm)};
    }
    A[3] = {pw(M, ap), pw(M, bp), 0, 0};
    b[3] = M;
    const auto c = gauss<4>(A, b);
    return {ap, bp, am, bm, c[0], c[1], c[2], c[3], m};
}

inline double pasting(const supres::ModelSpec& s, double m) {
    const auto v = stop_loss_value(s, m);
    return v.R * v.am * std::pow(m, v.am - 1) + v.T * v.bm * std::pow(m, v.bm - 1) - 1.0;
}

/// Largest root of the pasting residual over [L, H − eps], then over
/// (0, L) down to 1e-280·H; m = 0 when neither branch has one.
inline double stop_loss_level(const supres::ModelSpec& s, int n = 2000) {
    auto search = [&](double lo, double hi, bool geometric) -> double {
        double best = -1.0;
        double x0 = lo, f0 = pasting(s, lo);
        for (int i = 1; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            const double x1 = geometric ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
            const double f1 = pasting(s, x1);
            if ((f0 < 0) != (f1 < 0)) {
                double a = x0, b = x1, fa = f0;
                for (int k = 0; k < 200; ++k) {
                    const double c = 0.5 * (a + b);
                    const double fc = pasting(s, c);
                    if ((fc < 0) == (fa < 0)) {
                        a = c;
                        fa = fc;
                    } else {
                        b = c;
                    }
                }
                if (std::abs(pasting(s, 0.5 * (a + b))) < 1e-6) best = 0.5 * (a + b);
            }
            x0 = x1;
            f0 = f1;
        }
        return best;
    };
    const double c1 = search(s.L, s.H - 1e-6 * (s.H - s.L), false);
    if (c1 > 0) return c1;
    for (double hi = s.L, lo = 1e-8 * s.H; hi > 1e-280 * s.H; hi = lo, lo = std::max(lo * 1e-8, 1e-280 * s.H)) {
        const double c2 = search(lo, hi, true);
        if (c2 > 0) return c2;
    }
    return 0.0;
}

/// Discounted first passage of a GBM started at x below a level b: (x/b)^alpha.
inline double gbm_first_passage_up(double x, double b, double mu, double sigma, double r) {
    return std::pow(x / b, roots(sigma * sigma, mu, r).first);
}

}  // namespace oracle
