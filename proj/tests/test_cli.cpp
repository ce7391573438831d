#include "oracles.hpp"

#include "supres/cli.hpp"
#include "supres/config.hpp"
#include "supres/errors.hpp"
#include "supres/report.hpp"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

using namespace supres;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kExample = std::string(SUPRES_SOURCE_DIR) + "/configs/example1.json";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("supres_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Result {
    int code;
    std::string err;
};

Result run_cli(const std::string& command, std::vector<std::string> overrides, const fs::path& out,
               const std::string& config = kExample) {
    std::ostringstream err;
    const int code = cli::run({command, config, std::move(overrides), out.string()}, err);
    return {code, err.str()};
}

}  // namespace

TEST_CASE("example config parses") {
    const auto cfg = load_config(kExample);
    CHECK(cfg.model.L == 1.0);
    CHECK(cfg.model.M == 8.0);
    CHECK(std::get<Lognormal>(cfg.model.pos).sigma_rate == doctest::Approx(std::sqrt(0.06)));
    CHECK(cfg.mc.n_paths == 200000);
    CHECK(cfg.mc.seed == 20240601);
    CHECK(cfg.sweep.regime == Regime::Negative);
    REQUIRE(cfg.sweep.m_grid.size() == 21);
    CHECK(cfg.sweep.m_grid.front() > 0.0);
    CHECK(cfg.sweep.m_grid.back() < 1.5);
    CHECK(cfg.output.json);
    CHECK(cfg.output.csv);
}

TEST_CASE("config errors") {
    auto doc = read_config_document(kExample);
    auto bad = doc;
    bad["schema_version"] = 2;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = doc;
    bad["model"]["Lx"] = 1.0;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = doc;
    bad["model"]["positive"]["sigma"] = 0.2;  // both sigma and variance
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = doc;
    bad["solver"]["tol_paste"] = 0.0;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = doc;
    bad["output"]["formats"] = json::array();
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    CHECK_THROWS_AS(read_config_document("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("general dynamics in config") {
    auto doc = read_config_document(kExample);
    doc["model"]["negative"] = {{"type", "general"},
                                {"mu", {{"knots", {0.0, 10.0}}, {"values", {0.0, 0.05}}}},
                                {"sigma", {{"pieces", {{{"lo", 0.0}, {"hi", 10.0}, {"coeffs", {0.0, 0.1}}}}}}}};
    const auto cfg = parse_config(doc);
    REQUIRE(std::holds_alternative<General>(cfg.model.neg));
    CHECK(coefficients(cfg.model, Regime::Negative, 2.0).drift == doctest::Approx(0.01));
    CHECK(coefficients(cfg.model, Regime::Negative, 2.0).volatility == doctest::Approx(0.2));
    CHECK(model_to_json(cfg.model)["negative"]["type"] == "general");
}

TEST_CASE("overrides are order independent for distinct keys") {
    const std::vector<std::string> a{"model.r=0.03", "mc.seed=7", "simulate.rule=sell_at_cap", "output.directory=x"};
    std::vector<std::string> b(a.rbegin(), a.rend());
    auto da = read_config_document(kExample);
    auto db = da;
    apply_overrides(da, a);
    apply_overrides(db, b);
    CHECK(da == db);
    CHECK(da["model"]["r"] == 0.03);
    CHECK(da["simulate"]["rule"] == "sell_at_cap");
    auto dc = read_config_document(kExample);
    apply_overrides(dc, {"check.new_section.k=1"});
    CHECK(dc["check"]["new_section"]["k"] == 1);
    CHECK_THROWS_AS(apply_overrides(dc, {"no_equals_sign"}), ConfigError);
}

TEST_CASE("shortest round-trip formatting") {
    std::mt19937_64 gen(3);
    for (int i = 0; i < 2000; ++i) {
        double x;
        const auto bits = gen();
        std::memcpy(&x, &bits, sizeof x);
        if (!std::isfinite(x)) continue;
        CHECK(std::stod(format_double(x)) == x);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(2.0) == "2");
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("solve-sell writes a record that reproduces the table") {
    const auto out = scratch("solve_sell");
    const auto r = run_cli("solve-sell", {}, out);
    REQUIRE(r.code == cli::kOk);
    const json rec = json::parse(slurp(out / "sell_solution.json"));
    CHECK(rec["schema_version"] == 1);
    CHECK(rec["command"] == "solve-sell");
    CHECK(rec["case"] == "C1");
    CHECK(rec["m_hat"].get<double>() == doctest::Approx(1.1469763520840346));
    const std::string table = slurp(out / "sell_table.csv");
    CHECK(table.rfind("x,v_plus,v_minus,dv_plus,dv_minus\n", 0) == 0);

    const auto cfg = load_config(kExample);
    const Model model = Model::validate(cfg.model);
    auto funds = std::make_shared<const Fundamentals>(cli::configured_fundamentals(model, cfg));
    const auto v = value_from_record(model, funds, rec);
    CHECK(sell_table_csv(v, cfg.solver.table_points) == table);
}

TEST_CASE("solve-buy appends the threshold") {
    const auto out = scratch("solve_buy");
    REQUIRE(run_cli("solve-buy", {}, out).code == cli::kOk);
    const json rec = json::parse(slurp(out / "buy_solution.json"));
    CHECK(rec["B"].get<double>() == doctest::Approx(4.857276416040021).epsilon(1e-9));
    CHECK(rec.contains("kappa"));
    CHECK(rec["psi_normalization"] == "decay_at_infinity");
    const std::string table = slurp(out / "buy_table.csv");
    CHECK(table.rfind("x,v_plus,v_minus,dv_plus,dv_minus,g_plus,rho,u_plus,u_minus\n", 0) == 0);
}

TEST_CASE("validation errors exit with 1 and a structured record") {
    const auto out = scratch("bad_levels");
    const auto r = run_cli("solve-sell", {"model.H=0.5"}, out);
    CHECK(r.code == cli::kValidation);
    const json e = json::parse(r.err);
    CHECK(e["error"] == "ValidationError");
    CHECK(e["exit_code"] == 1);
    CHECK(e["violations"][0]["code"] == "LevelOrderViolation");

    CHECK(run_cli("solve-sell", {"mc.scheme=\"milstein\""}, out).code == cli::kValidation);
    CHECK(run_cli("bogus", {}, out).code == cli::kValidation);
    CHECK(run_cli("solve-sell", {}, out, "/nonexistent.json").code == cli::kValidation);
}

TEST_CASE("numerical failures exit with 2") {
    const auto out = scratch("numerical");
    const std::string general =
        R"(model.negative={"type":"general","mu":{"knots":[0,10],"values":[0,0.05]},"sigma":{"knots":[0,10],"values":[0,1]}})";
    const auto r = run_cli("solve-sell", {general, "solver.tol_ode=1e-30"}, out);
    CHECK(r.code == cli::kNumerical);
    const json e = json::parse(r.err);
    CHECK(e["exit_code"] == 2);
    CHECK(e["error"] == "IntegrationFailure");
    // The same model with the default budget solves.
    CHECK(run_cli("solve-sell", {general}, out).code == cli::kOk);
}

TEST_CASE("check passes on the example and fails with an impossible budget") {
    const auto out = scratch("check");
    const auto ok = run_cli("check", {"mc.n_paths=20000"}, out);
    CHECK(ok.code == cli::kOk);
    const json rec = json::parse(slurp(out / "check.json"));
    CHECK(rec["all_pass"] == true);
    CHECK(rec["checks"].size() == 12);

    const auto bad = run_cli("check", {"mc.n_paths=2000", "solver.tol_ode=1e-300"}, out);
    CHECK(bad.code == cli::kCheckFailed);
    CHECK(json::parse(bad.err)["error"] == "CheckFailed");
}

TEST_CASE("simulate output does not depend on the worker count") {
    const std::vector<std::string> base{"mc.n_paths=5000", "mc.horizon=200"};
    for (const char* rule : {"optimal_sell", "optimal_buy"}) {
        CAPTURE(rule);
        auto one = base, three = base;
        one.push_back(std::string("simulate.rule=") + rule);
        three.push_back(std::string("simulate.rule=") + rule);
        one.push_back("mc.workers=1");
        three.push_back("mc.workers=3");
        const auto a = scratch("sim_w1"), b = scratch("sim_w3");
        REQUIRE(run_cli("simulate", one, a).code == cli::kOk);
        REQUIRE(run_cli("simulate", three, b).code == cli::kOk);
        CHECK(slurp(a / "simulate.json") == slurp(b / "simulate.json"));
        CHECK(slurp(a / "simulate.csv") == slurp(b / "simulate.csv"));
    }
}
