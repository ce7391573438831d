// SPDX-License-Identifier: MIT
#include "supres/sell.hpp"

#include "supres/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace supres {

std::string_view to_string(CaseTag tag) noexcept {
    switch (tag) {
        case CaseTag::C1: return "C1";
        case CaseTag::C2: return "C2";
        case CaseTag::C3: return "C3";
    }
    return "C?";
}

CaseTag parse_case(std::string_view text) {
    if (text == "C1") return CaseTag::C1;
    if (text == "C2") return CaseTag::C2;
    if (text == "C3") return CaseTag::C3;
    throw ConfigError("unknown case tag '" + std::string(text) + "'");
}

CaseTag branch_for(const Model& model, double m) {
    if (!(m >= 0.0 && m < model.H())) throw DomainError("stop-loss level must lie in [0, H)");
    if (m == 0.0) return CaseTag::C3;
    return m < model.L() ? CaseTag::C2 : CaseTag::C1;
}

namespace {

constexpr double kRcondFloor = 1e-15;
constexpr double kConditionTol = 1e-10;
constexpr double kEdgeSlack = 1e-12;
constexpr double kTinyLevel = 1e-280;  // deepest C2 level tried, relative to H

ValueCoefficients to_coeffs(const Eigen::Vector4d& c) {
    return {c(0), c(1), c(2), c(3)};
}

// Rows in (A-, B-, A+, B+) order.
void fill_system(const Fundamentals& fs, double L, double H, double M, double m, CaseTag tag,
                 Eigen::Matrix4d& N, Eigen::Vector4d& rhs) {
    const auto& phm = fs.phi_minus;
    const auto& psm = fs.neg.psi;
    const auto& php = fs.pos.phi;
    const auto& psp = fs.pos.psi;

    if (tag == CaseTag::C3) {
        N.row(0) << 0.0, 1.0, 0.0, 0.0;
        rhs(0) = 0.0;
    } else {
        N.row(0) << phm.value(m), psm.value(m), 0.0, 0.0;
        rhs(0) = m;
    }
    N.row(1) << phm.value(H), psm.value(H), -php.value(H), -psp.value(H);
    rhs(1) = 0.0;
    if (tag == CaseTag::C1) {
        N.row(2) << 0.0, 0.0, php.value(L), psp.value(L);
        rhs(2) = L;
    } else {
        N.row(2) << -phm.value(L), -psm.value(L), php.value(L), psp.value(L);
        rhs(2) = 0.0;
    }
    N.row(3) << 0.0, 0.0, php.value(M), psp.value(M);
    rhs(3) = M;
}

}  // namespace

ValueCoefficients assemble_candidate(const Model& model, const Fundamentals& funds, double m, CaseTag tag) {
    const double L = model.L(), H = model.H(), M = model.M();
    if (tag == CaseTag::C1 && !(m >= L && m < H)) throw DomainError("C1 candidate needs m in [L, H)");
    if (tag == CaseTag::C2 && !(m > 0.0 && m <= L)) throw DomainError("C2 candidate needs m in (0, L]");

    Eigen::Matrix4d N;
    Eigen::Vector4d rhs;
    fill_system(funds, L, H, M, m, tag, N, rhs);

    // Row equilibration keeps the condition estimate meaningful across scales.
    for (int i = 0; i < 4; ++i) {
        const double s = N.row(i).cwiseAbs().maxCoeff();
        if (!(s > 0.0) || !std::isfinite(s))
            throw NumericalError(NumericalFailure::SingularSystem, "boundary system has a degenerate row", s);
        N.row(i) /= s;
        rhs(i) /= s;
    }
    // Column scaling as well: with a steep negative-regime root the B- column
    // is many orders of magnitude below the others on the C1 branch.
    Eigen::Vector4d col;
    for (int j = 0; j < 4; ++j) {
        const double s = N.col(j).cwiseAbs().maxCoeff();
        col(j) = s > 0.0 ? 1.0 / s : 1.0;
        N.col(j) *= col(j);
    }
    Eigen::PartialPivLU<Eigen::Matrix4d> lu(N);
    const double rcond = lu.rcond();
    if (!(rcond > kRcondFloor)) {
        std::ostringstream os;
        os << "boundary system for " << to_string(tag) << " at m=" << m << " is singular (rcond=" << rcond << ")";
        throw NumericalError(NumericalFailure::SingularSystem, os.str(), rcond > 0.0 ? 1.0 / rcond : INFINITY);
    }
    Eigen::Vector4d c = lu.solve(rhs);
    // One refinement step: near m = 0 the first row is tiny next to the others
    // and B- comes out of a cancellation.
    c += lu.solve(rhs - N * c);

    // Normwise backward error.
    const Eigen::Vector4d res = N * c - rhs;
    const double scale = N.cwiseAbs().rowwise().sum().maxCoeff() * c.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff();
    for (int i = 0; i < 4; ++i) {
        if (!std::isfinite(res(i)) || std::abs(res(i)) > kConditionTol * std::max(scale, 1e-300)) {
            std::ostringstream os;
            os << "boundary condition " << i << " for " << to_string(tag) << " at m=" << m
               << " not met after solve";
            throw NumericalError(NumericalFailure::SingularSystem, os.str(), 1.0 / rcond);
        }
    }
    return to_coeffs(col.cwiseProduct(c));
}

double pasting_residual(const Model& model, const Fundamentals& funds, double m, CaseTag tag) {
    const auto c = assemble_candidate(model, funds, m, tag);
    return c.a_neg * funds.phi_minus.derivative(m) + c.b_neg * funds.neg.psi.derivative(m) - 1.0;
}

C3Value case_c3_value(const Model& model, const Fundamentals& funds) {
    const double L = model.L(), H = model.H(), M = model.M();
    const auto hit = hit_functionals(model, funds);
    const double phi_L = hit.phi_minus.value(L);
    const double denom = 1.0 - phi_L * hit.delta.value(H);
    if (!(denom > 0.0)) {
        std::ostringstream os;
        os << "C3 denominator 1 - phi_minus(L) delta(H) = " << denom << " is not positive";
        throw NumericalError(NumericalFailure::DegenerateDenominator, os.str(), denom);
    }
    const double vH = M * hit.chi.value(H) / denom;
    // v(x,+) = M chi(x) + v(L,-) delta(x) with v(L,-) = phi_minus(L) v(H,-).
    return {{vH, 0.0, M, phi_L * vH}, denom, vH};
}

// ---------------------------------------------------------------------------
// StopLossValue

StopLossValue::StopLossValue(const Model& model, std::shared_ptr<const Fundamentals> funds, double m)
    : model_(model), funds_(std::move(funds)), m_(m), tag_(branch_for(model_, m)) {
    coeffs_ = assemble_candidate(model_, *funds_, m_, tag_);
}

StopLossValue::StopLossValue(const Model& model, std::shared_ptr<const Fundamentals> funds, double m, CaseTag tag,
                             ValueCoefficients coeffs)
    : model_(model), funds_(std::move(funds)), m_(m), tag_(tag), coeffs_(coeffs) {}

void StopLossValue::check_domain(double x, Regime f) const {
    const double L = model_.L(), H = model_.H(), M = model_.M();
    if (!std::isfinite(x)) throw DomainError("price must be finite");
    if (f == Regime::Positive) {
        if (x < L * (1.0 - kEdgeSlack) || x > M * (1.0 + kEdgeSlack)) {
            std::ostringstream os;
            os << "v(x,+) is defined on [L, M]; got x=" << x;
            throw DomainError(os.str());
        }
    } else if (!(x > 0.0) || x > H * (1.0 + kEdgeSlack)) {
        std::ostringstream os;
        os << "v(x,-) is defined on (0, H]; got x=" << x;
        throw DomainError(os.str());
    }
}

namespace {

// Negative-regime continuation value. Below a numeric floor only phi_minus
// contributes (C3), and it is continued linearly through the origin.
double neg_value(const Fundamentals& fs, const ValueCoefficients& c, double x, int order) {
    if (fs.floor > 0.0 && x < fs.floor) {
        const double slope = c.a_neg * fs.phi_minus.derivative(fs.floor);
        if (order == 0) return slope * x;
        return order == 1 ? slope : 0.0;
    }
    switch (order) {
        case 0: return c.a_neg * fs.phi_minus.value(x) + c.b_neg * fs.neg.psi.value(x);
        case 1: return c.a_neg * fs.phi_minus.derivative(x) + c.b_neg * fs.neg.psi.derivative(x);
        default: return c.a_neg * fs.phi_minus.second_derivative(x) + c.b_neg * fs.neg.psi.second_derivative(x);
    }
}

double pos_value(const Fundamentals& fs, const ValueCoefficients& c, double x, int order) {
    switch (order) {
        case 0: return c.a_pos * fs.pos.phi.value(x) + c.b_pos * fs.pos.psi.value(x);
        case 1: return c.a_pos * fs.pos.phi.derivative(x) + c.b_pos * fs.pos.psi.derivative(x);
        default: return c.a_pos * fs.pos.phi.second_derivative(x) + c.b_pos * fs.pos.psi.second_derivative(x);
    }
}

}  // namespace

double StopLossValue::value(double x, Regime f) const {
    check_domain(x, f);
    if (f == Regime::Positive) return pos_value(*funds_, coeffs_, x, 0);
    if (x < m_) return x;
    return neg_value(*funds_, coeffs_, x, 0);
}

double StopLossValue::derivative(double x, Regime f) const {
    check_domain(x, f);
    if (f == Regime::Positive) return pos_value(*funds_, coeffs_, x, 1);
    if (x < m_) return 1.0;
    return neg_value(*funds_, coeffs_, x, 1);
}

double StopLossValue::second_derivative(double x, Regime f) const {
    check_domain(x, f);
    if (f == Regime::Positive) return pos_value(*funds_, coeffs_, x, 2);
    if (x < m_) return 0.0;
    return neg_value(*funds_, coeffs_, x, 2);
}

// ---------------------------------------------------------------------------
// solver

namespace {

struct Bracket {
    double lo, hi;
    double r_lo, r_hi;
};

std::vector<Bracket> find_brackets(const std::vector<ResidualSample>& s) {
    std::vector<Bracket> out;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double a = s[i].residual, b = s[i + 1].residual;
        if (!std::isfinite(a) || !std::isfinite(b)) continue;
        const bool sign_change = a != 0.0 && b != 0.0 && (a < 0.0) != (b < 0.0);
        if (a == 0.0 || sign_change || (i + 2 == s.size() && b == 0.0))
            out.push_back({s[i].m, s[i + 1].m, a, b});
    }
    return out;
}

// Bisection to full double precision; returns the endpoint with the smaller |residual|.
ResidualSample bisect(const Model& model, const Fundamentals& fs, CaseTag tag, Bracket b) {
    if (b.r_lo == 0.0) return {b.lo, 0.0};
    if (b.r_hi == 0.0) return {b.hi, 0.0};
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (b.lo + b.hi);
        if (!(mid > b.lo && mid < b.hi)) break;
        const double rm = pasting_residual(model, fs, mid, tag);
        if (rm == 0.0) return {mid, 0.0};
        if ((rm < 0.0) == (b.r_lo < 0.0)) {
            b.lo = mid;
            b.r_lo = rm;
        } else {
            b.hi = mid;
            b.r_hi = rm;
        }
    }
    return std::abs(b.r_lo) <= std::abs(b.r_hi) ? ResidualSample{b.lo, b.r_lo} : ResidualSample{b.hi, b.r_hi};
}

std::vector<ResidualSample> scan(const Model& model, const Fundamentals& fs, CaseTag tag,
                                 const std::vector<double>& grid) {
    std::vector<ResidualSample> out;
    out.reserve(grid.size());
    for (double m : grid) out.push_back({m, pasting_residual(model, fs, m, tag)});
    return out;
}

// Largest bracket whose bisection lands on a genuine root (poles also change sign).
bool pick_root(const Model& model, const Fundamentals& fs, CaseTag tag, const std::vector<ResidualSample>& samples,
               double tol, ResidualSample& root, std::size_t& count) {
    const auto brackets = find_brackets(samples);
    count = brackets.size();
    for (auto it = brackets.rbegin(); it != brackets.rend(); ++it) {
        const auto cand = bisect(model, fs, tag, *it);
        if (std::abs(cand.residual) <= tol) {
            root = cand;
            return true;
        }
    }
    return false;
}

}  // namespace

SellSolution classify_and_solve(const Model& model, std::shared_ptr<const Fundamentals> funds,
                                const SellOptions& opts) {
    if (!funds) throw std::invalid_argument("classify_and_solve: fundamentals are required");
    if (opts.grid_n < 2) throw ConfigError("sell grid needs at least two points");
    const Fundamentals& fs = *funds;
    const double L = model.L(), H = model.H();
    const std::size_t n = opts.grid_n;

    SellDiagnostics diag;

    // C1 branch on [L, H - eps].
    const double eps = opts.eps_rel * (H - L);
    std::vector<double> g1(n);
    for (std::size_t k = 0; k < n; ++k)
        g1[k] = L + (H - eps - L) * static_cast<double>(k) / static_cast<double>(n - 1);
    diag.c1_scan = scan(model, fs, CaseTag::C1, g1);

    ResidualSample root{};
    std::size_t count = 0;
    CaseTag tag = CaseTag::C3;
    if (pick_root(model, fs, CaseTag::C1, diag.c1_scan, opts.tol_paste, root, count)) {
        tag = CaseTag::C1;
    } else {
        // C2 branch on [eps0, L]: uniform and geometric points merged so both
        // ends are resolved.
        const double eps0 = std::max(opts.floor_rel * H, fs.floor);
        std::vector<double> g2;
        g2.reserve(2 * n);
        for (std::size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(n - 1);
            g2.push_back(eps0 + (L - eps0) * t);
            g2.push_back(eps0 * std::pow(L / eps0, t));
        }
        g2.front() = eps0;
        g2.back() = L;
        std::sort(g2.begin(), g2.end());
        g2.erase(std::unique(g2.begin(), g2.end()), g2.end());
        g2.erase(std::remove_if(g2.begin(), g2.end(), [&](double m) { return m < eps0 || m > L; }), g2.end());
        diag.c2_scan = scan(model, fs, CaseTag::C2, g2);
        if (pick_root(model, fs, CaseTag::C2, diag.c2_scan, opts.tol_paste, root, count)) tag = CaseTag::C2;

        // Closed forms have no floor. With mu- close to r the root can sit
        // many decades below eps0, so keep going down eight decades at a time
        // until the boundary system stops being representable.
        for (double hi = eps0; tag == CaseTag::C3 && fs.floor == 0.0 && hi > kTinyLevel * H;) {
            const double lo = std::max(hi * 1e-8, kTinyLevel * H);
            std::vector<double> g(n);
            for (std::size_t k = 0; k < n; ++k)
                g[k] = lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(n - 1));
            g.back() = hi;
            std::vector<ResidualSample> seg;
            try {
                seg = scan(model, fs, CaseTag::C2, g);
            } catch (const NumericalError&) {
                break;
            }
            if (pick_root(model, fs, CaseTag::C2, seg, opts.tol_paste, root, count)) tag = CaseTag::C2;
            seg.pop_back();
            diag.c2_scan.insert(diag.c2_scan.begin(), seg.begin(), seg.end());
            hi = lo;
        }
    }

    diag.root_count = count;
    diag.multiple_roots = count > 1;

    if (tag == CaseTag::C3) {
        const auto c3 = case_c3_value(model, fs);
        diag.c3_denominator = c3.denominator;
        StopLossValue vf(model, funds, 0.0, CaseTag::C3, c3.coeffs);
        return {CaseTag::C3, 0.0, c3.coeffs, std::move(vf), std::move(diag)};
    }

    diag.pasting_residual = root.residual;
    const auto coeffs = assemble_candidate(model, fs, root.m, tag);
    StopLossValue vf(model, funds, root.m, tag, coeffs);
    return {tag, root.m, coeffs, std::move(vf), std::move(diag)};
}

SellSolution classify_and_solve(const Model& model, const SellOptions& opts) {
    FundsolOptions fo;
    fo.floor_rel = opts.floor_rel;
    return classify_and_solve(model, std::make_shared<const Fundamentals>(build_fundamentals(model, fo)), opts);
}

double value_sell(const SellSolution& sol, double x, Regime f) {
    return sol.value_fn.value(x, f);
}

double value_sell_derivative(const SellSolution& sol, double x, Regime f) {
    return sol.value_fn.derivative(x, f);
}

}  // namespace supres
