// SPDX-License-Identifier: MIT
#include "supres/cli.hpp"

#include "supres/errors.hpp"
#include "supres/mc.hpp"
#include "supres/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>

namespace supres::cli {

using nlohmann::json;
namespace fs = std::filesystem;

Fundamentals configured_fundamentals(const Model& model, const RunConfig& cfg) {
    FundsolOptions fo;
    fo.numeric.tol_ode = cfg.solver.tol_ode;
    return build_fundamentals(model, fo);
}

SellOptions configured_sell_options(const RunConfig& cfg) {
    SellOptions so;
    so.grid_n = cfg.solver.grid_n;
    so.tol_paste = cfg.solver.tol_paste;
    return so;
}

BuyOptions configured_buy_options(const RunConfig& cfg) {
    BuyOptions bo;
    bo.grid_n = cfg.solver.buy_grid_n;
    bo.normalization = cfg.solver.psi_normalization;
    return bo;
}

namespace {

struct CheckFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

std::string dump(const json& j) {
    return j.dump(2) + "\n";
}

struct Context {
    RunConfig cfg;
    fs::path out;
};

SellSolution solve_sell(const RunConfig& cfg, const Model& model) {
    auto funds = std::make_shared<const Fundamentals>(configured_fundamentals(model, cfg));
    return classify_and_solve(model, std::move(funds), configured_sell_options(cfg));
}

json header(const std::string& command, const RunConfig& cfg) {
    return {{"schema_version", kSchemaVersion}, {"command", command}, {"model", model_to_json(cfg.model)}};
}

void cmd_solve_sell(const Context& ctx) {
    const Model model = Model::validate(ctx.cfg.model);
    const SellSolution sol = solve_sell(ctx.cfg, model);
    if (ctx.cfg.output.json) {
        json rec = header("solve-sell", ctx.cfg);
        rec.update(sell_record(sol));
        write_file(ctx.out / "sell_solution.json", dump(rec));
    }
    if (ctx.cfg.output.csv)
        write_file(ctx.out / "sell_table.csv", sell_table_csv(sol.value_fn, ctx.cfg.solver.table_points));
}

void cmd_solve_buy(const Context& ctx) {
    const Model model = Model::validate(ctx.cfg.model);
    const SellSolution sol = solve_sell(ctx.cfg, model);
    const BuySolution buy = find_B(sol, configured_buy_options(ctx.cfg));
    if (ctx.cfg.output.json) {
        json rec = header("solve-buy", ctx.cfg);
        rec.update(buy_record(buy));
        write_file(ctx.out / "buy_solution.json", dump(rec));
    }
    if (ctx.cfg.output.csv) write_file(ctx.out / "buy_table.csv", buy_table_csv(buy, ctx.cfg.solver.table_points));
}

void cmd_simulate(const Context& ctx) {
    const auto& s = ctx.cfg.simulate;
    Rule rule = SellAtCap{};
    double level = std::numeric_limits<double>::quiet_NaN();
    switch (s.rule) {
        case RuleKind::OptimalSell: {
            const SellSolution sol = solve_sell(ctx.cfg, Model::validate(ctx.cfg.model));
            level = sol.m_hat;
            rule = SellAtStopLoss{sol.m_hat};
            break;
        }
        case RuleKind::OptimalBuy: {
            const SellSolution sol = solve_sell(ctx.cfg, Model::validate(ctx.cfg.model));
            const BuySolution buy = find_B(sol, configured_buy_options(ctx.cfg));
            level = buy.B();
            rule = buy_rule(buy);
            break;
        }
        case RuleKind::StopLoss:
            level = s.m;
            rule = SellAtStopLoss{s.m};
            break;
        case RuleKind::SellImmediately: rule = SellImmediately{}; break;
        case RuleKind::SellAtCap: rule = SellAtCap{}; break;
    }
    const McEstimate e = run_rule(ctx.cfg.model, s.x0, s.regime, rule, ctx.cfg.mc);

    if (ctx.cfg.output.json) {
        json rec = header("simulate", ctx.cfg);
        rec["rule"] = std::string(to_string(s.rule));
        rec["level"] = level;
        rec["x0"] = s.x0;
        rec["regime"] = std::string(to_string(s.regime));
        rec["dt"] = ctx.cfg.mc.dt;
        rec["horizon"] = ctx.cfg.mc.horizon;
        rec["scheme"] = std::string(to_string(ctx.cfg.mc.scheme));
        rec["estimate"] = estimate_record(e);
        write_file(ctx.out / "simulate.json", dump(rec));
    }
    if (ctx.cfg.output.csv) {
        write_file(ctx.out / "simulate.csv",
                   csv({"rule", "level", "x0", "regime", "mean", "std_error", "n_paths", "seed", "truncated_fraction"},
                       {{std::string(to_string(s.rule)), format_double(level), format_double(s.x0),
                         std::string(to_string(s.regime)), format_double(e.mean), format_double(e.std_error),
                         std::to_string(e.n_paths), std::to_string(e.seed), format_double(e.truncated_fraction)}}));
    }
}

void cmd_sweep(const Context& ctx) {
    const auto& s = ctx.cfg.sweep;
    const auto table = sweep_stop_loss(ctx.cfg.model, s.x0, s.regime, s.m_grid, ctx.cfg.mc);
    if (ctx.cfg.output.json) {
        json rec = header("sweep", ctx.cfg);
        rec["x0"] = s.x0;
        rec["regime"] = std::string(to_string(s.regime));
        json rows = json::array();
        for (const auto& [m, e] : table) {
            json row = estimate_record(e);
            row["m"] = m;
            rows.push_back(row);
        }
        rec["table"] = rows;
        write_file(ctx.out / "sweep.json", dump(rec));
    }
    if (ctx.cfg.output.csv) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& [m, e] : table)
            rows.push_back({format_double(m), format_double(e.mean), format_double(e.std_error)});
        write_file(ctx.out / "sweep.csv", csv({"m", "mean", "std_error"}, rows));
    }
}

void cmd_check(const Context& ctx) {
    const Model model = Model::validate(ctx.cfg.model);
    const SellSolution sol = solve_sell(ctx.cfg, model);
    const BuySolution buy = find_B(sol, configured_buy_options(ctx.cfg));
    const auto items = run_check_suite(ctx.cfg, sol, buy);
    const bool all = std::all_of(items.begin(), items.end(), [](const CheckItem& c) { return c.pass; });

    json rec = header("check", ctx.cfg);
    rec["case"] = std::string(to_string(sol.case_tag));
    rec["m_hat"] = sol.m_hat;
    rec["B"] = buy.B();
    json list = json::array();
    for (const auto& c : items)
        list.push_back({{"name", c.name}, {"pass", c.pass}, {"measured", c.measured}, {"tolerance", c.tolerance}});
    rec["checks"] = list;
    rec["all_pass"] = all;
    if (ctx.cfg.output.json) write_file(ctx.out / "check.json", dump(rec));
    if (ctx.cfg.output.csv) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : items)
            rows.push_back({c.name, c.pass ? "pass" : "fail", format_double(c.measured), format_double(c.tolerance)});
        write_file(ctx.out / "check.csv", csv({"name", "result", "measured", "tolerance"}, rows));
    }
    if (!all) {
        std::string failed;
        for (const auto& c : items)
            if (!c.pass) failed += (failed.empty() ? "" : ", ") + c.name;
        throw CheckFailed("check suite failed: " + failed);
    }
}

void emit_error(std::ostream& err, const std::string& kind, int code, const std::string& message,
                json extra = json::object()) {
    json rec = {{"error", kind}, {"exit_code", code}, {"message", message}};
    rec.update(extra);
    err << rec.dump() << std::endl;
}

}  // namespace

int run(const Invocation& inv, std::ostream& err) {
    static const std::vector<std::string> commands{"solve-sell", "solve-buy", "simulate", "sweep", "check"};
    try {
        if (std::find(commands.begin(), commands.end(), inv.command) == commands.end())
            throw ConfigError("unknown command '" + inv.command + "'");
        Context ctx{load_config(inv.config_path, inv.overrides), {}};
        ctx.out = inv.out_dir ? fs::path(*inv.out_dir) : fs::path(ctx.cfg.output.directory);
        std::error_code ec;
        fs::create_directories(ctx.out, ec);
        if (ec) throw ConfigError("cannot create output directory '" + ctx.out.string() + "': " + ec.message());

        if (inv.command == "solve-sell") cmd_solve_sell(ctx);
        else if (inv.command == "solve-buy") cmd_solve_buy(ctx);
        else if (inv.command == "simulate") cmd_simulate(ctx);
        else if (inv.command == "sweep") cmd_sweep(ctx);
        else cmd_check(ctx);
        return kOk;
    } catch (const ValidationError& e) {
        json v = json::array();
        for (const auto& x : e.violations()) {
            json item = {{"code", std::string(to_string(x.code))}, {"message", x.message}};
            if (x.at) item["at"] = *x.at;
            v.push_back(item);
        }
        emit_error(err, "ValidationError", kValidation, e.what(), {{"violations", v}});
        return kValidation;
    } catch (const ConfigError& e) {
        emit_error(err, "ConfigError", kValidation, e.what());
        return kValidation;
    } catch (const DomainError& e) {
        emit_error(err, "DomainError", kValidation, e.what());
        return kValidation;
    } catch (const NumericalError& e) {
        emit_error(err, std::string(to_string(e.kind())), kNumerical, e.what(), {{"detail", e.detail()}});
        return kNumerical;
    } catch (const CheckFailed& e) {
        emit_error(err, "CheckFailed", kCheckFailed, e.what());
        return kCheckFailed;
    } catch (const std::exception& e) {
        emit_error(err, "NumericalFailure", kNumerical, e.what());
        return kNumerical;
    }
}

int main(int argc, char** argv) {
    CLI::App app{"Optimal selling and buying with support/resistance regime switching"};
    Invocation inv;
    std::string out;
    app.add_option("command", inv.command, "solve-sell | solve-buy | simulate | sweep | check")->required();
    app.add_option("--config,-c", inv.config_path, "JSON run configuration")->required();
    app.add_option("--set,-s", inv.overrides, "dotted key=value override, repeatable")->take_all();
    app.add_option("--out,-o", out, "output directory (defaults to output.directory)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error(std::cerr, "UsageError", kValidation, e.what());
        return kValidation;
    }
    if (!out.empty()) inv.out_dir = out;
    return run(inv, std::cerr);
}

// ---------------------------------------------------------------------------
// check suite

namespace {

double rel_residual(const DynamicsSpec& dyn, double r, double x, double v, double dv, double d2v) {
    const auto c = coefficients(dyn, x);
    const double a = 0.5 * c.volatility * c.volatility * d2v, b = c.drift * dv, d = r * v;
    const double scale = std::abs(a) + std::abs(b) + std::abs(d);
    return scale > 0.0 ? std::abs(a + b - d) / scale : 0.0;
}

std::vector<double> interior(double lo, double hi, std::size_t n) {
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    return xs;
}

std::vector<double> closed(double lo, double hi, std::size_t n) {
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return xs;
}

}  // namespace

std::vector<CheckItem> run_check_suite(const RunConfig& cfg, const SellSolution& sell, const BuySolution& buy) {
    const StopLossValue& v = sell.value_fn;
    const Model& model = v.model();
    const double L = model.L(), H = model.H(), M = model.M(), r = model.r();
    const std::size_t n = std::max<std::size_t>(cfg.check.grid_n, 2);
    const double tiny = 1e-12;
    std::vector<CheckItem> out;

    {
        double worst = std::numeric_limits<double>::infinity();
        for (double x : closed(L, M, n)) worst = std::min(worst, v.value(x, Regime::Positive) - x);
        out.push_back({"domination_plus", worst >= -tiny * M, worst, -tiny * M});
        worst = std::numeric_limits<double>::infinity();
        for (double x : closed(H / n, H, n)) worst = std::min(worst, v.value(x, Regime::Negative) - x);
        out.push_back({"domination_minus", worst >= -tiny * M, worst, -tiny * M});
    }
    {
        const double lo = std::max(sell.m_hat, H / n);
        double worst = std::numeric_limits<double>::infinity();
        double prev = gain(sell, lo, Regime::Negative);
        for (double x : closed(lo, H, n)) {
            const double g = gain(sell, x, Regime::Negative);
            worst = std::min(worst, g - prev);
            prev = g;
        }
        out.push_back({"monotone_gain_minus", worst >= -tiny * M, worst, -tiny * M});
    }
    if (sell.case_tag == CaseTag::C3) {
        double worst = std::numeric_limits<double>::infinity();
        for (double x : closed(H / n, H, n)) worst = std::min(worst, v.derivative(x, Regime::Negative) - 1.0);
        out.push_back({"c3_derivative_bound", worst >= -tiny, worst, -tiny});
    } else {
        const double res = std::abs(v.derivative(sell.m_hat, Regime::Negative) - 1.0);
        out.push_back({"smooth_pasting", res <= cfg.solver.tol_paste, res, cfg.solver.tol_paste});
    }
    {
        double worst = 0.0;
        for (double x : interior(L, M, n))
            worst = std::max(worst, rel_residual(model.dynamics(Regime::Positive), r, x, v.value(x, Regime::Positive),
                                                 v.derivative(x, Regime::Positive),
                                                 v.second_derivative(x, Regime::Positive)));
        out.push_back({"ode_residual_plus", worst <= cfg.solver.tol_ode, worst, cfg.solver.tol_ode});
        worst = 0.0;
        const double lo = std::max({sell.m_hat, v.fundamentals().floor, H * 1e-3});
        for (double x : interior(lo, H, n))
            worst = std::max(worst, rel_residual(model.dynamics(Regime::Negative), r, x, v.value(x, Regime::Negative),
                                                 v.derivative(x, Regime::Negative),
                                                 v.second_derivative(x, Regime::Negative)));
        out.push_back({"ode_residual_minus", worst <= cfg.solver.tol_ode, worst, cfg.solver.tol_ode});
    }
    {
        // Alternative stop-loss levels evaluated at a positive-regime and a
        // negative-regime point every candidate covers.
        const double xp = 0.5 * (L + M);
        const double best_p = v.value(xp, Regime::Positive), best_m = v.value(H, Regime::Negative);
        double worst = std::numeric_limits<double>::infinity();
        const std::size_t k = std::max<std::size_t>(cfg.check.sweep_n, 1);
        for (std::size_t i = 1; i <= k; ++i) {
            const double m = H * static_cast<double>(i) / static_cast<double>(k + 1);
            const StopLossValue alt(model, v.fundamentals_ptr(), m);
            worst = std::min({worst, best_p - alt.value(xp, Regime::Positive), best_m - alt.value(H, Regime::Negative)});
        }
        out.push_back({"analytic_sweep_optimality", worst >= -1e-8, worst, -1e-8});
    }
    {
        const auto d = martingale_check(sell, cfg.check.x0, cfg.check.regime, cfg.check.t_check, cfg.mc);
        out.push_back({"martingale", d.pass, d.difference, 3.0 * d.std_error});
    }
    {
        double worst = std::numeric_limits<double>::infinity();
        for (double x : closed(L, M, n)) worst = std::min(worst, buy.value(x, Regime::Positive) - gain(sell, x, Regime::Positive));
        for (double x : closed(H / n, H, n))
            worst = std::min(worst, buy.value(x, Regime::Negative) - gain(sell, x, Regime::Negative));
        out.push_back({"buy_domination", worst >= -tiny * M, worst, -tiny * M});
    }
    {
        const double rB = buy.kappa();
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& s : buy.rho_samples())
            if (s.x < M || buy.normalization() == PsiNormalization::DecayAtInfinity) worst = std::min(worst, rB - s.rho);
        out.push_back({"rho_optimality", worst >= -tiny * std::abs(rB), worst, -tiny * std::abs(rB)});
    }
    {
        double worst = std::numeric_limits<double>::infinity(), best = -std::numeric_limits<double>::infinity();
        const double lo = std::max(sell.m_hat, H / n);
        for (double x : interior(lo, H, n)) {
            const double d = buy.value(x, Regime::Negative) - gain(sell, x, Regime::Negative);
            worst = std::min(worst, d);
            best = std::max(best, d);
        }
        out.push_back({"never_buy_in_negative_regime", worst >= -tiny * M && best > 0.0, worst, -tiny * M});
    }
    {
        // L⁺u − ru on (B, M) by central differences, relative to the term sizes.
        double worst = 0.0;
        const auto& dyn = model.dynamics(Regime::Positive);
        const double B = buy.B();
        for (double x : interior(B, M, n)) {
            const double h = 1e-4 * x;
            if (x - h <= B || x + h >= M) continue;
            const double u0 = buy.value(x, Regime::Positive);
            const double up = buy.value(x + h, Regime::Positive), um = buy.value(x - h, Regime::Positive);
            const double d1 = (up - um) / (2 * h), d2 = (up - 2 * u0 + um) / (h * h);
            const auto c = coefficients(dyn, x);
            const double a = 0.5 * c.volatility * c.volatility * d2, b = c.drift * d1, d = r * u0;
            const double scale = std::abs(a) + std::abs(b) + std::abs(d);
            if (scale > 0.0) worst = std::max(worst, (a + b - d) / scale);
        }
        out.push_back({"buy_supersolution", worst <= 1e-5, worst, 1e-5});
    }
    return out;
}

}  // namespace supres::cli
