// SPDX-License-Identifier: MIT
#include "supres/fundsol.hpp"

#include "supres/errors.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace supres {

LognormalRoots lognormal_roots(double sigma2, double mu, double r) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("lognormal_roots: sigma2 must be positive");
    if (!(r > 0.0)) throw std::invalid_argument("lognormal_roots: r must be positive");
    // Product of the roots is −2r/σ²; take the cancellation-free root first.
    const double b = mu - 0.5 * sigma2;
    const double disc = std::sqrt(b * b + 2.0 * sigma2 * r);
    if (b >= 0.0) {
        const double beta = (-b - disc) / sigma2;
        return {-2.0 * r / (sigma2 * beta), beta};
    }
    const double alpha = (-b + disc) / sigma2;
    return {alpha, -2.0 * r / (sigma2 * alpha)};
}

// ---------------------------------------------------------------------------
// FundamentalSolution

FundamentalSolution FundamentalSolution::power_sum(double x0, double c1, double p1, double c2, double p2) {
    FundamentalSolution f;
    f.x0_ = x0;
    f.c1_ = c1;
    f.p1_ = p1;
    f.c2_ = c2;
    f.p2_ = p2;
    return f;
}

FundamentalSolution FundamentalSolution::tabulated(std::shared_ptr<const SolutionTable> table, double scale) {
    if (!table || table->x.size() < 2) throw std::invalid_argument("tabulated solution needs at least two nodes");
    FundamentalSolution f;
    f.table_ = std::move(table);
    f.scale_ = scale;
    return f;
}

FundamentalSolution FundamentalSolution::scaled(double s) const {
    FundamentalSolution f = *this;
    if (table_) {
        f.scale_ *= s;
    } else {
        f.c1_ *= s;
        f.c2_ *= s;
    }
    return f;
}

Interval FundamentalSolution::domain() const {
    if (!table_) return {0.0, std::numeric_limits<double>::infinity()};
    return {table_->x.front(), table_->x.back()};
}

namespace {

struct Cell {
    std::size_t i;  // left node
    double h;
    double t;
};

Cell locate(const SolutionTable& tab, double x) {
    const auto& xs = tab.x;
    const double lo = xs.front();
    const double hi = xs.back();
    const double slack = 1e-12 * hi;
    if (!(x >= lo - slack && x <= hi + slack)) {
        std::ostringstream os;
        os.precision(17);
        os << "tabulated solution evaluated at x=" << x << " outside [" << lo << ", " << hi << "]";
        throw DomainError(os.str());
    }
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t i = it == xs.begin() ? 0 : static_cast<std::size_t>(it - xs.begin()) - 1;
    if (i + 1 >= xs.size()) i = xs.size() - 2;
    const double h = xs[i + 1] - xs[i];
    return {i, h, (x - xs[i]) / h};
}

// Quintic Hermite basis on [0, 1] and its first two derivatives.
struct Basis {
    double h0, h1, h2, h3, h4, h5;
};

Basis basis(double t) {
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    return {1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5,
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            0.5 * t3 - t4 + 0.5 * t5};
}

Basis basis_d1(double t) {
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    return {-30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            t - 4.5 * t2 + 6.0 * t3 - 2.5 * t4,
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            1.5 * t2 - 4.0 * t3 + 2.5 * t4};
}

Basis basis_d2(double t) {
    const double t2 = t * t, t3 = t2 * t;
    return {-60.0 * t + 180.0 * t2 - 120.0 * t3,
            -36.0 * t + 96.0 * t2 - 60.0 * t3,
            1.0 - 9.0 * t + 18.0 * t2 - 10.0 * t3,
            60.0 * t - 180.0 * t2 + 120.0 * t3,
            -24.0 * t + 84.0 * t2 - 60.0 * t3,
            3.0 * t - 12.0 * t2 + 10.0 * t3};
}

double combine(const SolutionTable& tab, const Cell& c, const Basis& b, double scale_v, double scale_d,
               double scale_d2) {
    const std::size_t i = c.i;
    return scale_v * (b.h0 * tab.y[i] + b.h3 * tab.y[i + 1]) +
           scale_d * (b.h1 * tab.dy[i] + b.h4 * tab.dy[i + 1]) +
           scale_d2 * (b.h2 * tab.d2y[i] + b.h5 * tab.d2y[i + 1]);
}

}  // namespace

double FundamentalSolution::value(double x) const {
    if (!table_) return c1_ * std::pow(x / x0_, p1_) + c2_ * std::pow(x / x0_, p2_);
    const Cell c = locate(*table_, x);
    return scale_ * combine(*table_, c, basis(c.t), 1.0, c.h, c.h * c.h);
}

double FundamentalSolution::derivative(double x) const {
    if (!table_) {
        const double u = x / x0_;
        return (c1_ * p1_ * std::pow(u, p1_) + c2_ * p2_ * std::pow(u, p2_)) / x;
    }
    const Cell c = locate(*table_, x);
    return scale_ * combine(*table_, c, basis_d1(c.t), 1.0 / c.h, 1.0, c.h);
}

double FundamentalSolution::second_derivative(double x) const {
    if (!table_) {
        const double u = x / x0_;
        return (c1_ * p1_ * (p1_ - 1.0) * std::pow(u, p1_) + c2_ * p2_ * (p2_ - 1.0) * std::pow(u, p2_)) /
               (x * x);
    }
    const Cell c = locate(*table_, x);
    return scale_ * combine(*table_, c, basis_d2(c.t), 1.0 / (c.h * c.h), 1.0 / c.h, 1.0);
}

// ---------------------------------------------------------------------------
// closed form

FundamentalPair pair_closed_form(const Lognormal& dyn, double r, Interval anchors) {
    const double a = anchors.lo;
    const double b = anchors.hi;
    if (!(a > 0.0 && a < b)) throw std::invalid_argument("pair_closed_form: need 0 < a < b");
    const auto [alpha, beta] = lognormal_roots(dyn.sigma_rate * dyn.sigma_rate, dyn.mu_rate, r);
    // Powers of x/a: at a both are 1, at b they are rho^alpha and rho^beta.
    const double ra = std::pow(b / a, alpha);
    const double rb = std::pow(b / a, beta);
    const double det = ra - rb;
    if (!(std::abs(det) > 1e-300) || !std::isfinite(det))
        throw NumericalError(NumericalFailure::SingularNormalization,
                             "pair_closed_form: singular anchor system", det);
    FundamentalPair pair{
        FundamentalSolution::power_sum(a, 1.0 / det, alpha, -1.0 / det, beta),
        FundamentalSolution::power_sum(a, -rb / det, alpha, ra / det, beta),
        anchors,
        {0.0, std::numeric_limits<double>::infinity()},
    };
    return pair;
}

// ---------------------------------------------------------------------------
// numeric

namespace {

using State = std::array<double, 2>;

struct GeneratorRhs {
    const DynamicsSpec* dyn;
    double r;
    void operator()(const State& s, State& ds, double x) const {
        const auto c = coefficients(*dyn, x);
        ds[0] = s[1];
        ds[1] = 2.0 * (r * s[0] - c.drift * s[1]) / (c.volatility * c.volatility);
    }
};

double second_from_identity(const DynamicsSpec& dyn, double r, double x, double y, double dy) {
    const auto c = coefficients(dyn, x);
    return 2.0 * (r * y - c.drift * dy) / (c.volatility * c.volatility);
}

std::vector<double> build_nodes(const DynamicsSpec& dyn, Interval anchors, Interval domain, double max_log_step) {
    std::vector<double> breaks = {domain.lo, domain.hi};
    for (double a : {anchors.lo, anchors.hi})
        if (a > domain.lo && a < domain.hi) breaks.push_back(a);
    if (const auto* gen = std::get_if<General>(&dyn)) {
        for (const auto* poly : {&gen->mu, &gen->sigma}) {
            for (const auto& p : poly->pieces()) {
                for (double k : {p.lo, p.hi})
                    if (k > domain.lo * (1.0 + 1e-9) && k < domain.hi * (1.0 - 1e-9)) breaks.push_back(k);
            }
        }
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    std::vector<double> nodes;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        const double u = breaks[s];
        const double w = breaks[s + 1];
        const auto n = static_cast<std::size_t>(std::max(2.0, std::ceil(std::log(w / u) / max_log_step)));
        for (std::size_t k = 0; k < n; ++k)
            nodes.push_back(u * std::pow(w / u, static_cast<double>(k) / static_cast<double>(n)));
    }
    nodes.push_back(breaks.back());
    return nodes;
}

std::size_t index_of(const std::vector<double>& nodes, double x) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
    if (it == nodes.end() || *it != x) throw std::logic_error("anchor is not a grid node");
    return static_cast<std::size_t>(it - nodes.begin());
}

// Integrates from nodes[start] with (y0, dy0) towards both ends of the grid.
std::shared_ptr<SolutionTable> shoot(const DynamicsSpec& dyn, double r, const std::vector<double>& nodes,
                                     std::size_t start, double y0, double dy0, const NumericOptions& opts) {
    namespace odeint = boost::numeric::odeint;
    auto tab = std::make_shared<SolutionTable>();
    tab->x = nodes;
    tab->y.assign(nodes.size(), 0.0);
    tab->dy.assign(nodes.size(), 0.0);
    tab->d2y.assign(nodes.size(), 0.0);
    tab->y[start] = y0;
    tab->dy[start] = dy0;

    const GeneratorRhs rhs{&dyn, r};
    auto run = [&](auto first, auto last, bool forward) {
        if (std::distance(first, last) < 2) return;
        State s{y0, dy0};
        std::size_t k = start;
        auto observer = [&](const State& st, double) {
            tab->y[k] = st[0];
            tab->dy[k] = st[1];
            k = forward ? k + 1 : k - 1;
        };
        const double h0 = (forward ? 1.0 : -1.0) * 1e-3 * std::abs(*std::next(first) - *first);
        auto stepper = odeint::make_controlled(opts.atol, opts.rtol, odeint::runge_kutta_dopri5<State>());
        odeint::integrate_times(stepper, rhs, s, first, last, h0, observer);
    };

    try {
        run(nodes.begin() + static_cast<std::ptrdiff_t>(start), nodes.end(), true);
        run(nodes.rbegin() + static_cast<std::ptrdiff_t>(nodes.size() - 1 - start), nodes.rend(), false);
    } catch (const DomainError&) {
        throw;
    } catch (const std::exception& e) {
        throw NumericalError(NumericalFailure::IntegrationFailure,
                             std::string("fundamental solution integration failed: ") + e.what());
    }

    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!std::isfinite(tab->y[i]) || !std::isfinite(tab->dy[i]))
            throw NumericalError(NumericalFailure::IntegrationFailure,
                                 "fundamental solution integration produced a non-finite value", nodes[i]);
        tab->d2y[i] = second_from_identity(dyn, r, nodes[i], tab->y[i], tab->dy[i]);
    }
    return tab;
}

void require_monotone(const SolutionTable& tab, double sign, const char* name) {
    for (std::size_t i = 0; i < tab.x.size(); ++i) {
        if (!(sign * tab.dy[i] > 0.0)) {
            throw NumericalError(NumericalFailure::NonMonotoneSolution,
                                 std::string(name) + " is not strictly monotone on the grid", tab.x[i]);
        }
    }
}

void require_residual(const DynamicsSpec& dyn, double r, const FundamentalSolution& f, const char* name,
                      double tol) {
    const auto dom = f.domain();
    const double worst = max_relative_ode_residual(dyn, r, f, dom, 2000);
    if (!(worst <= tol)) {
        std::ostringstream os;
        os << name << ": ODE residual " << worst << " exceeds tol_ode " << tol;
        throw NumericalError(NumericalFailure::IntegrationFailure, os.str(), worst);
    }
}

}  // namespace

FundamentalPair pair_numeric(const DynamicsSpec& dyn, double r, Interval anchors, Interval domain,
                             const NumericOptions& opts) {
    if (!(anchors.lo > 0.0 && anchors.lo < anchors.hi))
        throw std::invalid_argument("pair_numeric: need 0 < a < b");
    if (!(domain.lo > 0.0 && domain.lo <= anchors.lo && domain.hi >= anchors.hi))
        throw std::invalid_argument("pair_numeric: domain must contain the anchors and stay positive");

    const auto nodes = build_nodes(dyn, anchors, domain, opts.max_log_step);
    const std::size_t ia = index_of(nodes, anchors.lo);
    const std::size_t ib = index_of(nodes, anchors.hi);

    auto up = shoot(dyn, r, nodes, ia, 0.0, 1.0, opts);
    auto down = shoot(dyn, r, nodes, ib, 0.0, -1.0, opts);
    require_monotone(*up, +1.0, "phi");
    require_monotone(*down, -1.0, "psi");

    const double up_at_b = up->y[ib];
    const double down_at_a = down->y[ia];
    if (!(up_at_b > 0.0) || !(down_at_a > 0.0))
        throw NumericalError(NumericalFailure::SingularNormalization, "pair_numeric: degenerate anchor value");

    FundamentalPair pair{
        FundamentalSolution::tabulated(up, 1.0 / up_at_b),
        FundamentalSolution::tabulated(down, 1.0 / down_at_a),
        anchors,
        {nodes.front(), nodes.back()},
    };
    require_residual(dyn, r, pair.phi, "phi", opts.tol_ode);
    require_residual(dyn, r, pair.psi, "psi", opts.tol_ode);
    return pair;
}

double relative_ode_residual(const DynamicsSpec& dyn, double r, const FundamentalSolution& f, double x) {
    const auto c = coefficients(dyn, x);
    double d2;
    if (f.closed_form()) {
        d2 = f.second_derivative(x);
    } else {
        // Step inside the cell so the central difference sees one polynomial piece.
        const Cell cell = locate(*f.table(), x);
        const double room = std::min(x - f.table()->x[cell.i], f.table()->x[cell.i + 1] - x);
        const double delta = room > 0.0 ? 0.5 * room : 0.25 * cell.h;
        auto central = [&](double h) { return (f.derivative(x + h) - f.derivative(x - h)) / (2.0 * h); };
        d2 = (4.0 * central(0.5 * delta) - central(delta)) / 3.0;
    }
    const double y = f.value(x);
    const double dy = f.derivative(x);
    const double diffusion = 0.5 * c.volatility * c.volatility * d2;
    const double advection = c.drift * dy;
    const double discount = r * y;
    const double scale = std::abs(diffusion) + std::abs(advection) + std::abs(discount);
    if (scale == 0.0) return 0.0;
    return std::abs(diffusion + advection - discount) / scale;
}

double max_relative_ode_residual(const DynamicsSpec& dyn, double r, const FundamentalSolution& f, Interval where,
                                 std::size_t n) {
    double worst = 0.0;
    if (f.closed_form()) {
        for (std::size_t k = 0; k < n; ++k) {
            const double x = where.lo * std::pow(where.hi / where.lo, (k + 0.5) / static_cast<double>(n));
            worst = std::max(worst, relative_ode_residual(dyn, r, f, x));
        }
        return worst;
    }
    const auto& xs = f.table()->x;
    std::vector<double> mids;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double m = 0.5 * (xs[i] + xs[i + 1]);
        if (m >= where.lo && m <= where.hi) mids.push_back(m);
    }
    const std::size_t stride = std::max<std::size_t>(1, mids.size() / std::max<std::size_t>(n, 1));
    for (std::size_t i = 0; i < mids.size(); i += stride)
        worst = std::max(worst, relative_ode_residual(dyn, r, f, mids[i]));
    return worst;
}

double wronskian(const FundamentalPair& pair, double x) {
    return pair.phi.derivative(x) * pair.psi.value(x) - pair.phi.value(x) * pair.psi.derivative(x);
}

// ---------------------------------------------------------------------------
// model-level construction

namespace {

FundamentalSolution increasing_from_origin(const DynamicsSpec& dyn, double r, double upper, double floor,
                                           const NumericOptions& opts) {
    if (const auto* ln = std::get_if<Lognormal>(&dyn)) {
        const auto roots = lognormal_roots(ln->sigma_rate * ln->sigma_rate, ln->mu_rate, r);
        return FundamentalSolution::power_sum(upper, 1.0, roots.alpha, 0.0, roots.beta);
    }
    const auto nodes = build_nodes(dyn, {floor, upper}, {floor, upper}, opts.max_log_step);
    auto tab = shoot(dyn, r, nodes, 0, 0.0, 1.0, opts);
    require_monotone(*tab, +1.0, "phi_minus");
    auto f = FundamentalSolution::tabulated(tab, 1.0 / tab->y.back());
    require_residual(dyn, r, f, "phi_minus", opts.tol_ode);
    return f;
}

FundamentalSolution decreasing_to_infinity(const DynamicsSpec& dyn, double r, double lower, double far,
                                           const NumericOptions& opts) {
    if (const auto* ln = std::get_if<Lognormal>(&dyn)) {
        const auto roots = lognormal_roots(ln->sigma_rate * ln->sigma_rate, ln->mu_rate, r);
        return FundamentalSolution::power_sum(lower, 1.0, roots.beta, 0.0, roots.alpha);
    }
    const auto nodes = build_nodes(dyn, {lower, far}, {lower, far}, opts.max_log_step);
    auto tab = shoot(dyn, r, nodes, nodes.size() - 1, 0.0, -1.0, opts);
    require_monotone(*tab, -1.0, "psi_pos_inf");
    auto f = FundamentalSolution::tabulated(tab, 1.0 / tab->y.front());
    require_residual(dyn, r, f, "psi_pos_inf", opts.tol_ode);
    return f;
}

}  // namespace

Fundamentals build_fundamentals(const Model& model, const FundsolOptions& opts) {
    const double L = model.L(), H = model.H(), M = model.M(), r = model.r();
    const auto& pos = model.dynamics(Regime::Positive);
    const auto& neg = model.dynamics(Regime::Negative);

    auto make_pair = [&](const DynamicsSpec& dyn, Interval anchors, Interval domain) {
        if (const auto* ln = std::get_if<Lognormal>(&dyn)) return pair_closed_form(*ln, r, anchors);
        return pair_numeric(dyn, r, anchors, domain, opts.numeric);
    };

    const double neg_floor = is_lognormal(neg) ? 0.0 : opts.floor_rel * H;
    return Fundamentals{
        make_pair(pos, {L, M}, {L, M}),
        make_pair(neg, {L, H}, {neg_floor, H}),
        increasing_from_origin(neg, r, H, neg_floor, opts.numeric),
        decreasing_to_infinity(pos, r, L, opts.far_factor * M, opts.numeric),
        neg_floor,
    };
}

HitFunctionals hit_functionals(const Model&, const Fundamentals& funds) {
    // Identities under the interval-anchored normalization on (L, M).
    return {funds.pos.phi, funds.pos.psi, funds.phi_minus};
}

}  // namespace supres
