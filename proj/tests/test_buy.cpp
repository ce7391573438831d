#include "oracles.hpp"

#include "supres/buy.hpp"
#include "supres/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <memory>

using namespace supres;

namespace {

SellSolution sell_for(const ModelSpec& spec) {
    return classify_and_solve(Model::validate(spec));
}

}  // namespace

TEST_CASE("example buying threshold") {
    const auto sell = sell_for(oracle::example1());
    const auto buy = find_B(sell);
    CHECK(buy.normalization() == PsiNormalization::DecayAtInfinity);
    CHECK(buy.B() > 1.0);
    CHECK(buy.B() < 8.0);
    CHECK(buy.B() == doctest::Approx(4.857276416040021).epsilon(1e-9));
    CHECK(buy.kappa() == doctest::Approx(gain(sell, buy.B(), Regime::Positive) * buy.B()).epsilon(1e-12));
    CHECK(buy.derivative_mismatch() <= 1e-6);
    CHECK(std::isnan(buy.rho_limit_at_cap()));

    // Brute force over 10^4 points of g(x,+)·x (psi = 1/x here).
    double best_x = 1.0, best = -1e300;
    for (int i = 0; i < 10000; ++i) {
        const double x = 1.0 + 7.0 * i / 9999.0;
        const auto o = oracle::stop_loss_value(oracle::example1(), sell.m_hat);
        const double rho = (o.plus(x) - x) * x;
        if (rho > best) {
            best = rho;
            best_x = x;
        }
    }
    CHECK(std::abs(buy.B() - best_x) <= 7.0 / 9999.0);
    CHECK(buy.kappa() >= best - 1e-12);
}

TEST_CASE("buy value dominates the gain and is proportional to psi above B") {
    const auto sell = sell_for(oracle::example1());
    const auto buy = find_B(sell);
    for (int i = 0; i <= 1000; ++i) {
        const double x = 1.0 + 7.0 * i / 1000.0;
        CHECK(buy_value(buy, x, Regime::Positive) >= gain(sell, x, Regime::Positive) - 1e-12);
        if (x > buy.B()) CHECK(buy_value(buy, x, Regime::Positive) == doctest::Approx(buy.kappa() / x).epsilon(1e-12));
    }
    for (int i = 1; i <= 1000; ++i) {
        const double x = 2.0 * i / 1000.0;
        CHECK(buy_value(buy, x, Regime::Negative) >= gain(sell, x, Regime::Negative) - 1e-12);
        CHECK(buy_value(buy, x, Regime::Negative) ==
              doctest::Approx(buy_value(buy, 2.0, Regime::Positive) * (x / 2.0) * (x / 2.0)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(buy_value(buy, 2.5, Regime::Negative), DomainError);
}

TEST_CASE("ratio maximization") {
    // Constant ratio: leftmost tie wins.
    const auto flat = maximize_ratio([](double x) { return 3.0 * x; }, [](double x) { return x; }, 1.0, 4.0, 50);
    CHECK(flat.x == 1.0);
    CHECK(flat.value == doctest::Approx(3.0));
    // Interior maximum off the grid is polished.
    const auto peak = maximize_ratio([](double x) { return -(x - 2.345678) * (x - 2.345678); },
                                     [](double) { return 1.0; }, 1.0, 4.0, 11);
    CHECK(peak.x == doctest::Approx(2.345678).epsilon(1e-7));
    CHECK(peak.samples.size() == 11);
    CHECK_THROWS_AS(maximize_ratio([](double) { return 0.0; }, [](double) { return 1.0; }, 2.0, 1.0, 10),
                    std::invalid_argument);
}

TEST_CASE("threshold is invariant to price units") {
    const auto base = find_B(sell_for(oracle::example1()));
    auto spec = oracle::example1();
    const double k = 3.7;
    spec.L *= k;
    spec.H *= k;
    spec.M *= k;
    const auto scaled = find_B(sell_for(spec));
    // The ratio is flat at its maximum, so the argmax is only good to about sqrt(eps).
    CHECK(scaled.B() == doctest::Approx(k * base.B()).epsilon(1e-7));
    CHECK(scaled.kappa() == doctest::Approx(k * base.kappa()).epsilon(1e-10));
    CHECK(buy_value(scaled, k * 1.5, Regime::Negative) == doctest::Approx(k * buy_value(base, 1.5, Regime::Negative)).epsilon(1e-9));
}

TEST_CASE("cap-anchored normalization") {
    const auto sell = sell_for(oracle::example1());
    BuyOptions opts;
    opts.normalization = PsiNormalization::AnchoredAtCap;
    const auto capped = find_B(sell, opts);
    const auto decay = find_B(sell);
    CHECK(capped.normalization() == PsiNormalization::AnchoredAtCap);
    CHECK(std::isfinite(capped.rho_limit_at_cap()));
    CHECK(capped.psi(1.0) == doctest::Approx(1.0));
    CHECK(std::abs(capped.psi(8.0)) <= 1e-12);
    // The cap-anchored ratio keeps rising towards M.
    CHECK(capped.B() > decay.B());
    for (double x : {1.0, 2.0, 4.0, 7.0}) CHECK(capped.value(x, Regime::Positive) >= gain(sell, x, Regime::Positive) - 1e-12);
    const auto rule = buy_rule(capped);
    CHECK(rule.forfeit_at_cap);
    CHECK(rule.B == capped.B());
    CHECK_FALSE(buy_rule(decay).forfeit_at_cap);
    CHECK(buy_rule(decay).gain(9.0, Regime::Positive) == 0.0);
    CHECK(parse_psi_normalization("anchored_at_cap") == PsiNormalization::AnchoredAtCap);
    CHECK_THROWS_AS(parse_psi_normalization("other"), ConfigError);
}
