// SPDX-License-Identifier: MIT
#include "supres/config.hpp"

#include "supres/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace supres {

using nlohmann::json;

std::string_view to_string(RuleKind k) noexcept {
    switch (k) {
        case RuleKind::OptimalSell: return "optimal_sell";
        case RuleKind::StopLoss: return "stop_loss";
        case RuleKind::SellImmediately: return "sell_immediately";
        case RuleKind::SellAtCap: return "sell_at_cap";
        case RuleKind::OptimalBuy: return "optimal_buy";
    }
    return "optimal_sell";
}

RuleKind parse_rule_kind(std::string_view text) {
    for (auto k : {RuleKind::OptimalSell, RuleKind::StopLoss, RuleKind::SellImmediately, RuleKind::SellAtCap,
                   RuleKind::OptimalBuy})
        if (text == to_string(k)) return k;
    throw ConfigError("unknown rule '" + std::string(text) + "'");
}

json read_config_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
}

void apply_overrides(json& doc, const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "' is not key=value");
        const std::string key = ov.substr(0, eq);
        const std::string text = ov.substr(eq + 1);
        json value;
        try {
            value = json::parse(text);
        } catch (const json::parse_error&) {
            value = text;
        }
        std::string pointer;
        std::stringstream ks(key);
        for (std::string part; std::getline(ks, part, '.');) {
            if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
            pointer += '/' + part;
        }
        try {
            doc[json::json_pointer(pointer)] = std::move(value);
        } catch (const json::exception& e) {
            throw ConfigError("cannot apply override '" + ov + "': " + e.what());
        }
    }
}

namespace {

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    for (const auto& [k, _] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
            throw ConfigError("unknown key '" + where + "." + k + "'");
    }
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw ConfigError(where + " must be a number");
    return j.get<double>();
}

std::size_t count(const json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(where + " must be a nonnegative integer");
    return j.get<std::size_t>();
}

std::string text(const json& j, const std::string& where) {
    if (!j.is_string()) throw ConfigError(where + " must be a string");
    return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + " must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

PiecewisePolynomial parse_poly(const json& j, const std::string& where) {
    if (j.is_number()) return PiecewisePolynomial::constant(j.get<double>(), 0.0, 1.0);
    require_object(j, where);
    if (j.contains("knots")) {
        only_keys(j, where, {"knots", "values"});
        if (!j.contains("values")) throw ConfigError(where + " needs 'values' with 'knots'");
        return PiecewisePolynomial::linear_interpolant(numbers(j["knots"], where + ".knots"),
                                                       numbers(j["values"], where + ".values"));
    }
    only_keys(j, where, {"pieces"});
    if (!j.contains("pieces") || !j["pieces"].is_array())
        throw ConfigError(where + " needs 'knots'/'values' or a 'pieces' array");
    std::vector<PiecewisePolynomial::Piece> pieces;
    for (std::size_t i = 0; i < j["pieces"].size(); ++i) {
        const auto& p = j["pieces"][i];
        const std::string w = where + ".pieces[" + std::to_string(i) + "]";
        require_object(p, w);
        only_keys(p, w, {"lo", "hi", "coeffs"});
        pieces.push_back({number(p.at("lo"), w + ".lo"), number(p.at("hi"), w + ".hi"), numbers(p.at("coeffs"), w + ".coeffs")});
    }
    return PiecewisePolynomial(std::move(pieces));
}

DynamicsSpec parse_dynamics(const json& j, const std::string& where) {
    require_object(j, where);
    const std::string type = j.contains("type") ? text(j["type"], where + ".type") : "lognormal";
    if (type == "lognormal") {
        only_keys(j, where, {"type", "mu", "sigma", "variance"});
        if (!j.contains("mu")) throw ConfigError(where + ".mu is required");
        if (j.contains("sigma") == j.contains("variance"))
            throw ConfigError(where + " needs exactly one of 'sigma' and 'variance'");
        const double sigma = j.contains("sigma") ? number(j["sigma"], where + ".sigma")
                                                 : std::sqrt(number(j["variance"], where + ".variance"));
        return Lognormal{number(j["mu"], where + ".mu"), sigma};
    }
    if (type == "general") {
        only_keys(j, where, {"type", "mu", "sigma"});
        if (!j.contains("mu") || !j.contains("sigma")) throw ConfigError(where + " needs 'mu' and 'sigma'");
        return General{parse_poly(j["mu"], where + ".mu"), parse_poly(j["sigma"], where + ".sigma")};
    }
    throw ConfigError(where + ".type must be 'lognormal' or 'general'");
}

std::vector<double> parse_grid(const json& j, const std::string& where) {
    if (j.is_array()) return numbers(j, where);
    require_object(j, where);
    only_keys(j, where, {"lo", "hi", "n"});
    const double lo = number(j.at("lo"), where + ".lo");
    const double hi = number(j.at("hi"), where + ".hi");
    const std::size_t n = count(j.at("n"), where + ".n");
    if (!(lo < hi) || n == 0) throw ConfigError(where + " needs lo < hi and n >= 1");
    // Interior points of (lo, hi).
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = lo + (hi - lo) * static_cast<double>(k + 1) / static_cast<double>(n + 1);
    return out;
}

template <class F>
void with(const json& parent, const char* key, F&& f) {
    if (parent.contains(key)) f(parent[key]);
}

}  // namespace

RunConfig parse_config(const json& doc) {
    require_object(doc, "config");
    only_keys(doc, "config", {"schema_version", "model", "solver", "mc", "simulate", "sweep", "check", "output"});
    if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer() ||
        doc["schema_version"].get<int>() != kSchemaVersion)
        throw ConfigError("config needs \"schema_version\": 1");
    if (!doc.contains("model")) throw ConfigError("config needs a 'model' section");

    RunConfig cfg;
    const json& m = doc["model"];
    require_object(m, "model");
    only_keys(m, "model", {"L", "H", "M", "r", "positive", "negative"});
    for (const char* k : {"L", "H", "M", "r", "positive", "negative"})
        if (!m.contains(k)) throw ConfigError(std::string("model.") + k + " is required");
    cfg.model.L = number(m["L"], "model.L");
    cfg.model.H = number(m["H"], "model.H");
    cfg.model.M = number(m["M"], "model.M");
    cfg.model.r = number(m["r"], "model.r");
    cfg.model.pos = parse_dynamics(m["positive"], "model.positive");
    cfg.model.neg = parse_dynamics(m["negative"], "model.negative");

    with(doc, "solver", [&](const json& s) {
        require_object(s, "solver");
        only_keys(s, "solver", {"grid_n", "tol_paste", "tol_ode", "buy_grid_n", "psi_normalization", "table_points"});
        with(s, "grid_n", [&](const json& v) { cfg.solver.grid_n = count(v, "solver.grid_n"); });
        with(s, "tol_paste", [&](const json& v) { cfg.solver.tol_paste = number(v, "solver.tol_paste"); });
        with(s, "tol_ode", [&](const json& v) { cfg.solver.tol_ode = number(v, "solver.tol_ode"); });
        with(s, "buy_grid_n", [&](const json& v) { cfg.solver.buy_grid_n = count(v, "solver.buy_grid_n"); });
        with(s, "psi_normalization", [&](const json& v) {
            cfg.solver.psi_normalization = parse_psi_normalization(text(v, "solver.psi_normalization"));
        });
        with(s, "table_points", [&](const json& v) { cfg.solver.table_points = count(v, "solver.table_points"); });
    });
    if (!(cfg.solver.tol_paste > 0.0) || !(cfg.solver.tol_ode > 0.0))
        throw ConfigError("solver tolerances must be positive");
    if (cfg.solver.grid_n < 2 || cfg.solver.buy_grid_n < 2 || cfg.solver.table_points < 1)
        throw ConfigError("solver grids need at least two points and tables at least one row");

    with(doc, "mc", [&](const json& s) {
        require_object(s, "mc");
        only_keys(s, "mc", {"n_paths", "dt", "seed", "horizon", "scheme", "workers"});
        with(s, "n_paths", [&](const json& v) { cfg.mc.n_paths = count(v, "mc.n_paths"); });
        with(s, "dt", [&](const json& v) { cfg.mc.dt = number(v, "mc.dt"); });
        with(s, "seed", [&](const json& v) {
            if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
                throw ConfigError("mc.seed must be a nonnegative integer");
            cfg.mc.seed = v.get<std::uint64_t>();
        });
        with(s, "horizon", [&](const json& v) { cfg.mc.horizon = number(v, "mc.horizon"); });
        with(s, "scheme", [&](const json& v) { cfg.mc.scheme = parse_scheme(text(v, "mc.scheme")); });
        with(s, "workers", [&](const json& v) { cfg.mc.workers = static_cast<unsigned>(count(v, "mc.workers")); });
    });
    validate(cfg.mc);

    with(doc, "simulate", [&](const json& s) {
        require_object(s, "simulate");
        only_keys(s, "simulate", {"x0", "regime", "rule", "m"});
        with(s, "x0", [&](const json& v) { cfg.simulate.x0 = number(v, "simulate.x0"); });
        with(s, "regime", [&](const json& v) { cfg.simulate.regime = parse_regime(text(v, "simulate.regime")); });
        with(s, "rule", [&](const json& v) { cfg.simulate.rule = parse_rule_kind(text(v, "simulate.rule")); });
        with(s, "m", [&](const json& v) { cfg.simulate.m = number(v, "simulate.m"); });
    });

    with(doc, "sweep", [&](const json& s) {
        require_object(s, "sweep");
        only_keys(s, "sweep", {"x0", "regime", "m_grid"});
        with(s, "x0", [&](const json& v) { cfg.sweep.x0 = number(v, "sweep.x0"); });
        with(s, "regime", [&](const json& v) { cfg.sweep.regime = parse_regime(text(v, "sweep.regime")); });
        with(s, "m_grid", [&](const json& v) { cfg.sweep.m_grid = parse_grid(v, "sweep.m_grid"); });
    });
    if (cfg.sweep.m_grid.empty()) {
        const double hi = std::min(cfg.sweep.x0, cfg.model.H);
        for (int k = 1; k <= 21; ++k) cfg.sweep.m_grid.push_back(hi * k / 22.0);
    }

    with(doc, "check", [&](const json& s) {
        require_object(s, "check");
        only_keys(s, "check", {"x0", "regime", "t_check", "grid_n", "sweep_n"});
        with(s, "x0", [&](const json& v) { cfg.check.x0 = number(v, "check.x0"); });
        with(s, "regime", [&](const json& v) { cfg.check.regime = parse_regime(text(v, "check.regime")); });
        with(s, "t_check", [&](const json& v) { cfg.check.t_check = number(v, "check.t_check"); });
        with(s, "grid_n", [&](const json& v) { cfg.check.grid_n = count(v, "check.grid_n"); });
        with(s, "sweep_n", [&](const json& v) { cfg.check.sweep_n = count(v, "check.sweep_n"); });
    });

    with(doc, "output", [&](const json& s) {
        require_object(s, "output");
        only_keys(s, "output", {"directory", "formats"});
        with(s, "directory", [&](const json& v) { cfg.output.directory = text(v, "output.directory"); });
        with(s, "formats", [&](const json& v) {
            if (!v.is_array()) throw ConfigError("output.formats must be an array");
            cfg.output.json = cfg.output.csv = false;
            for (const auto& f : v) {
                const auto name = text(f, "output.formats[]");
                if (name == "json")
                    cfg.output.json = true;
                else if (name == "csv")
                    cfg.output.csv = true;
                else
                    throw ConfigError("output.formats accepts 'json' and 'csv', got '" + name + "'");
            }
        });
    });
    if (!cfg.output.json && !cfg.output.csv) throw ConfigError("output.formats must not be empty");
    return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json doc = read_config_document(path);
    apply_overrides(doc, overrides);
    return parse_config(doc);
}

namespace {

json poly_to_json(const PiecewisePolynomial& p) {
    json pieces = json::array();
    for (const auto& piece : p.pieces()) pieces.push_back({{"lo", piece.lo}, {"hi", piece.hi}, {"coeffs", piece.coeffs}});
    return {{"pieces", pieces}};
}

json dynamics_to_json(const DynamicsSpec& d) {
    if (const auto* ln = std::get_if<Lognormal>(&d))
        return {{"type", "lognormal"}, {"mu", ln->mu_rate}, {"sigma", ln->sigma_rate}};
    const auto& g = std::get<General>(d);
    return {{"type", "general"}, {"mu", poly_to_json(g.mu)}, {"sigma", poly_to_json(g.sigma)}};
}

}  // namespace

json model_to_json(const ModelSpec& spec) {
    return {{"L", spec.L},
            {"H", spec.H},
            {"M", spec.M},
            {"r", spec.r},
            {"positive", dynamics_to_json(spec.pos)},
            {"negative", dynamics_to_json(spec.neg)}};
}

}  // namespace supres
