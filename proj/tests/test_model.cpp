#include "oracles.hpp"

#include "supres/errors.hpp"
#include "supres/model.hpp"

#include <doctest.h>

#include <algorithm>

using namespace supres;

namespace {

bool has(const std::vector<Violation>& v, ViolationCode code) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

}  // namespace

TEST_CASE("example model validates") {
    const Model m = Model::validate(oracle::example1());
    CHECK(m.L() == 1.0);
    CHECK(m.H() == 2.0);
    CHECK(m.M() == 8.0);
    CHECK(m.lognormal());
}

TEST_CASE("level order violations") {
    auto s = oracle::example1();
    s.H = 0.5;
    CHECK(has(find_violations(s), ViolationCode::LevelOrderViolation));
    s = oracle::example1();
    s.M = 1.5;  // M < H
    CHECK(has(find_violations(s), ViolationCode::LevelOrderViolation));
    s = oracle::example1();
    s.L = 0.0;
    CHECK(has(find_violations(s), ViolationCode::LevelOrderViolation));
    s = oracle::example1();
    s.M = s.H;  // H = M is allowed
    CHECK(find_violations(s).empty());
}

TEST_CASE("drift sandwich, volatility and rate") {
    auto s = oracle::example1();
    s.neg = Lognormal{0.03, 0.1};
    CHECK(has(find_violations(s), ViolationCode::DriftSandwichViolation));
    s = oracle::example1();
    s.pos = Lognormal{0.01, 0.2};
    CHECK(has(find_violations(s), ViolationCode::DriftSandwichViolation));
    s = oracle::example1();
    s.pos = Lognormal{0.04, 0.0};
    CHECK(has(find_violations(s), ViolationCode::NonpositiveVolatility));
    s = oracle::example1();
    s.r = 0.0;
    CHECK(has(find_violations(s), ViolationCode::NonpositiveRate));
    // Boundary of the sandwich is admissible.
    s = oracle::example1();
    s.neg = Lognormal{0.02, 0.1};
    s.pos = Lognormal{0.02, 0.2};
    CHECK(find_violations(s).empty());
}

TEST_CASE("all violations are reported together") {
    auto s = oracle::example1();
    s.H = 0.5;
    s.r = -1.0;
    s.neg = Lognormal{0.5, -0.1};
    try {
        Model::validate(s);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(has(e.violations(), ViolationCode::LevelOrderViolation));
        CHECK(has(e.violations(), ViolationCode::NonpositiveRate));
        CHECK(has(e.violations(), ViolationCode::NonpositiveVolatility));
    }
}

TEST_CASE("general coefficients") {
    auto s = oracle::example1();
    // mu(x) = 0.01 x below 1, bent to 0.015 x − 0.005 above; continuous at the knot.
    const PiecewisePolynomial mu({{0.0, 1.0, {0.0, 0.01}}, {1.0, 10.0, {-0.005, 0.015}}});
    const PiecewisePolynomial sig = PiecewisePolynomial::linear_interpolant({0.0, 10.0}, {0.0, 1.0});
    s.neg = General{mu, sig};
    CHECK(find_violations(s).empty());
    CHECK(coefficients(s, Regime::Negative, 2.0).drift == doctest::Approx(0.025));
    CHECK(coefficients(s, Regime::Negative, 2.0).volatility == doctest::Approx(0.2));

    const PiecewisePolynomial jump({{0.0, 1.0, {0.0, 0.01}}, {1.0, 10.0, {0.0, 0.012}}});
    s.neg = General{jump, sig};
    CHECK(has(find_violations(s), ViolationCode::DiscontinuousCoefficient));

    // Drift above r x somewhere in (0, M].
    const PiecewisePolynomial hot({{0.0, 10.0, {0.0, 0.01, 0.01}}});
    s.neg = General{hot, sig};
    const auto v = find_violations(s);
    REQUIRE(has(v, ViolationCode::DriftSandwichViolation));
    const auto it = std::find_if(v.begin(), v.end(), [](const Violation& x) {
        return x.code == ViolationCode::DriftSandwichViolation;
    });
    REQUIRE(it->at.has_value());
    CHECK(*it->at <= s.M);
}

TEST_CASE("coefficients reject nonpositive prices") {
    const auto s = oracle::example1();
    CHECK_THROWS_AS(coefficients(s, Regime::Positive, 0.0), DomainError);
    CHECK_THROWS_AS(coefficients(s, Regime::Negative, -1.0), DomainError);
    const auto c = coefficients(s, Regime::Positive, 3.0);
    CHECK(c.drift == doctest::Approx(0.12));
    CHECK(c.volatility == doctest::Approx(3.0 * std::sqrt(0.06)));
}

TEST_CASE("piecewise polynomial") {
    const PiecewisePolynomial p({{0.0, 1.0, {1.0, 2.0}}, {1.0, 2.0, {0.0, 0.0, 3.0}}});
    CHECK(p(0.5) == doctest::Approx(2.0));
    CHECK(p(1.5) == doctest::Approx(6.75));
    CHECK(p.derivative(1.5) == doctest::Approx(9.0));
    CHECK(p(5.0) == doctest::Approx(75.0));  // end piece extended
    CHECK(p.max_knot_jump() == doctest::Approx(0.0));
    CHECK_THROWS_AS(PiecewisePolynomial({{0.0, 1.0, {1.0}}, {1.5, 2.0, {1.0}}}), ConfigError);
    CHECK_THROWS_AS(PiecewisePolynomial::linear_interpolant({1.0}, {1.0}), ConfigError);
}

TEST_CASE("regime text") {
    CHECK(parse_regime("+") == Regime::Positive);
    CHECK(parse_regime("negative") == Regime::Negative);
    CHECK(to_string(Regime::Negative) == "-");
    CHECK_THROWS_AS(parse_regime("up"), ConfigError);
}
