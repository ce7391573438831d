#include "oracles.hpp"

#include "supres/errors.hpp"
#include "supres/sell.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

using namespace supres;

namespace {

struct Solved {
    Model model;
    std::shared_ptr<const Fundamentals> funds;
    SellSolution sol;
};

Solved solve(const ModelSpec& spec) {
    Model model = Model::validate(spec);
    auto funds = std::make_shared<const Fundamentals>(build_fundamentals(model));
    auto sol = classify_and_solve(model, funds);
    return {model, funds, std::move(sol)};
}

}  // namespace

TEST_CASE("example stop-loss level") {
    const auto s = solve(oracle::example1());
    // The pasting root lies in [L, H): the instance belongs to C1.
    CHECK(s.sol.case_tag == CaseTag::C1);
    CHECK(s.sol.m_hat == doctest::Approx(oracle::stop_loss_level(oracle::example1())).epsilon(1e-9));
    CHECK(s.sol.m_hat == doctest::Approx(1.1469763520840346).epsilon(1e-12));
    CHECK(std::abs(s.sol.diagnostics.pasting_residual) <= 1e-9);
    CHECK_FALSE(s.sol.diagnostics.multiple_roots);
    CHECK(value_sell(s.sol, 1.0, Regime::Positive) == doctest::Approx(1.0));
    CHECK(value_sell(s.sol, 1.5, Regime::Positive) > 1.5);
}

TEST_CASE("positive component on the C1 branch in the power basis") {
    const auto s = solve(oracle::example1());
    const StopLossValue v(s.model, s.funds, 1.5);
    REQUIRE(v.branch() == CaseTag::C1);
    // v(x,+) = A x^{2/3} + B x^{-1}; recover (A, B) from two evaluations.
    const double x1 = 2.0, x2 = 5.0;
    const auto ab = oracle::gauss<2>({{{std::pow(x1, 2.0 / 3.0), 1.0 / x1}, {std::pow(x2, 2.0 / 3.0), 1.0 / x2}}},
                                     {v.value(x1, Regime::Positive), v.value(x2, Regime::Positive)});
    CHECK(std::abs(ab[0] - 63.0 / 31.0) <= 1e-12);
    CHECK(std::abs(ab[1] + 32.0 / 31.0) <= 1e-12);
    // The printed pair misses v(M,+) = M by more than 1%.
    const double A = 65.0 / 33.0, B = -32.0 / 33.0;
    CHECK(std::abs(4.0 * A + B / 8.0 - 8.0) / 8.0 > 1e-2);
}

TEST_CASE("stop-loss values satisfy their boundary conditions") {
    const auto s = solve(oracle::example1());
    for (double m : {0.0, 0.3, 0.9, 1.0, 1.2, 1.9}) {
        CAPTURE(m);
        const StopLossValue v(s.model, s.funds, m);
        CHECK(v.branch() == branch_for(s.model, m));
        if (m > 0.0) CHECK(std::abs(v.value(m, Regime::Negative) - m) <= 1e-10);
        CHECK(std::abs(v.value(2.0, Regime::Negative) - v.value(2.0, Regime::Positive)) <= 1e-10);
        CHECK(std::abs(v.value(8.0, Regime::Positive) - 8.0) <= 1e-10 * 8.0);
        if (m >= 1.0) CHECK(std::abs(v.value(1.0, Regime::Positive) - 1.0) <= 1e-10);
        else CHECK(std::abs(v.value(1.0, Regime::Positive) - v.value(1.0, Regime::Negative)) <= 1e-10);
        // Oracle in the raw power basis.
        const auto o = oracle::stop_loss_value(oracle::example1(), m);
        for (double x : {1.0, 2.0, 4.0, 8.0}) CHECK(v.value(x, Regime::Positive) == doctest::Approx(o.plus(x)).epsilon(1e-11));
        for (double x : {0.2, 1.1, 1.7, 2.0}) CHECK(v.value(x, Regime::Negative) == doctest::Approx(o.minus(x)).epsilon(1e-11));
    }
}

TEST_CASE("pasting residual is continuous across the branch switch") {
    const auto s = solve(oracle::example1());
    const double L = 1.0, d = 1e-6;
    const double left = pasting_residual(s.model, *s.funds, L - d, CaseTag::C2);
    const double right = pasting_residual(s.model, *s.funds, L + d, CaseTag::C1);
    const double at = pasting_residual(s.model, *s.funds, L, CaseTag::C1);
    CHECK(std::abs(left - at) <= 1e-4);
    CHECK(std::abs(right - at) <= 1e-4);
    CHECK(at == doctest::Approx(oracle::pasting(oracle::example1(), L)).epsilon(1e-10));
}

TEST_CASE("C2 instances") {
    struct Fixture {
        double L, H, M, mup, sp, mum, sm, r, m_hat;
    };
    // Rates (mu, sigma) per regime; m_hat from the independent oracle, pinned here to catch drift in either.
    const Fixture cases[] = {
        {1.0, 1.2, 3.0, 0.08, 0.3, 0.0, 0.3, 0.05, 0.78276},
        {1.0, 1.5, 4.0, 0.07, 0.25, 0.04, 0.2, 0.05, 0.43253},
        {1.0, 1.1, 2.0, 0.06, 0.2, 0.045, 0.4, 0.05, 0.19384},
    };
    for (const auto& c : cases) {
        const auto spec = oracle::lognormal(c.L, c.H, c.M, c.r, c.mup, c.sp, c.mum, c.sm);
        const auto s = solve(spec);
        CAPTURE(c.m_hat);
        CHECK(s.sol.case_tag == CaseTag::C2);
        CHECK(s.sol.m_hat == doctest::Approx(oracle::stop_loss_level(spec)).epsilon(1e-8));
        CHECK(s.sol.m_hat == doctest::Approx(c.m_hat).epsilon(1e-4));
        CHECK(std::abs(value_sell_derivative(s.sol, s.sol.m_hat, Regime::Negative) - 1.0) <= 1e-8);
        CHECK(value_sell(s.sol, c.L, Regime::Positive) > c.L);
    }
}

TEST_CASE("drift equal to the rate in the negative regime gives C3") {
    // Prices are a martingale after discounting below H, so waiting costs nothing.
    const auto spec = oracle::lognormal(1.0, 2.0, 8.0, 0.02, 0.04, std::sqrt(0.06), 0.02, 0.1);
    const auto s = solve(spec);
    CHECK(s.sol.case_tag == CaseTag::C3);
    CHECK(s.sol.m_hat == 0.0);
    const auto c3 = case_c3_value(s.model, *s.funds);
    CHECK(c3.denominator > 0.0);
    CHECK(s.sol.diagnostics.c3_denominator == doctest::Approx(c3.denominator));
    CHECK(value_sell(s.sol, 2.0, Regime::Negative) == doctest::Approx(c3.value_at_H).epsilon(1e-10));
    // Renewal value agrees with the m = 0 boundary-condition solve.
    const auto o = oracle::stop_loss_value(spec, 0.0);
    CHECK(c3.value_at_H == doctest::Approx(o.minus(2.0)).epsilon(1e-10));
    for (double x = 0.05; x <= 2.0; x += 0.05) CHECK(value_sell_derivative(s.sol, x, Regime::Negative) >= 1.0 - 1e-12);
}

TEST_CASE("sampled lognormal models never fall in C3") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(gen); };
    int c1 = 0, c2 = 0;
    for (int i = 0; i < 40; ++i) {
        double rates[3] = {in(1e-3, 0.2), in(1e-3, 0.2), in(1e-3, 0.2)};
        std::sort(rates, rates + 3);
        const double L = in(0.1, 5.0), H = L + in(0.01, 5.0), M = H + in(0.0, 10.0);
        const auto spec = oracle::lognormal(L, H, M, rates[1], rates[2], std::sqrt(in(1e-3, 0.5)), rates[0],
                                            std::sqrt(in(1e-3, 0.5)));
        const auto s = solve(spec);
        CAPTURE(i);
        REQUIRE(s.sol.case_tag != CaseTag::C3);
        (s.sol.case_tag == CaseTag::C1 ? c1 : c2)++;
        CHECK(s.sol.m_hat == doctest::Approx(oracle::stop_loss_level(spec)).epsilon(1e-7));
    }
    CHECK(c1 + c2 == 40);
}

TEST_CASE("optimal value dominates the payoff and every other stop-loss") {
    const auto s = solve(oracle::example1());
    for (double x = 1.0; x <= 8.0; x += 0.07) CHECK(value_sell(s.sol, x, Regime::Positive) >= x - 1e-12);
    for (double x = 0.01; x <= 2.0; x += 0.01) CHECK(value_sell(s.sol, x, Regime::Negative) >= x - 1e-12);
    for (double m = 0.0; m < 2.0; m += 0.02) {
        const StopLossValue alt(s.model, s.funds, m);
        CHECK(value_sell(s.sol, 1.5, Regime::Negative) >= alt.value(1.5, Regime::Negative) - 1e-8);
        CHECK(value_sell(s.sol, 4.0, Regime::Positive) >= alt.value(4.0, Regime::Positive) - 1e-8);
    }
}

TEST_CASE("stop-loss value domain") {
    const auto s = solve(oracle::example1());
    const StopLossValue v(s.model, s.funds, 0.5);
    CHECK_THROWS_AS(v.value(0.5, Regime::Positive), DomainError);
    CHECK_THROWS_AS(v.value(9.0, Regime::Positive), DomainError);
    CHECK_THROWS_AS(v.value(2.5, Regime::Negative), DomainError);
    CHECK_THROWS_AS(v.value(0.0, Regime::Negative), DomainError);
    CHECK(v.value(0.25, Regime::Negative) == 0.25);
    CHECK(v.derivative(0.25, Regime::Negative) == 1.0);
    CHECK_THROWS_AS(StopLossValue(s.model, s.funds, 2.0), DomainError);
    CHECK_THROWS_AS(assemble_candidate(s.model, *s.funds, 0.5, CaseTag::C1), DomainError);
    CHECK_THROWS_AS(assemble_candidate(s.model, *s.funds, 1.5, CaseTag::C2), DomainError);
}

TEST_CASE("case text") {
    CHECK(to_string(CaseTag::C2) == "C2");
    CHECK(parse_case("C3") == CaseTag::C3);
    CHECK_THROWS_AS(parse_case("C4"), ConfigError);
}
