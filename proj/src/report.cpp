// SPDX-License-Identifier: MIT
#include "supres/report.hpp"

#include "supres/errors.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace supres {

using nlohmann::json;

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

namespace {

std::vector<std::string> sell_cells(const StopLossValue& v, double x) {
    const Model& m = v.model();
    std::vector<std::string> row{format_double(x), "", "", "", ""};
    if (x >= m.L()) {
        row[1] = format_double(v.value(x, Regime::Positive));
        row[3] = format_double(v.derivative(x, Regime::Positive));
    }
    if (x <= m.H()) {
        row[2] = format_double(v.value(x, Regime::Negative));
        row[4] = format_double(v.derivative(x, Regime::Negative));
    }
    return row;
}

double table_x(const Model& m, std::size_t i, std::size_t n) {
    return m.M() * static_cast<double>(i) / static_cast<double>(n);
}

}  // namespace

std::string sell_table_csv(const StopLossValue& v, std::size_t n) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) rows.push_back(sell_cells(v, table_x(v.model(), i, n)));
    return csv({"x", "v_plus", "v_minus", "dv_plus", "dv_minus"}, rows);
}

std::string buy_table_csv(const BuySolution& b, std::size_t n) {
    const StopLossValue& v = b.sell().value_fn;
    const Model& m = v.model();
    std::vector<std::vector<std::string>> rows;
    rows.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const double x = table_x(m, i, n);
        auto row = sell_cells(v, x);
        std::string g, rho, up, um;
        if (x >= m.L()) {
            g = format_double(gain(b.sell(), x, Regime::Positive));
            const double p = b.psi(x);
            if (p > 0.0) rho = format_double(b.rho(x));
            up = format_double(b.value(x, Regime::Positive));
        }
        if (x <= m.H()) um = format_double(b.value(x, Regime::Negative));
        row.insert(row.end(), {g, rho, up, um});
        rows.push_back(std::move(row));
    }
    return csv({"x", "v_plus", "v_minus", "dv_plus", "dv_minus", "g_plus", "rho", "u_plus", "u_minus"}, rows);
}

namespace {

json samples(const std::vector<ResidualSample>& s) {
    json m = json::array(), r = json::array();
    for (const auto& p : s) {
        m.push_back(p.m);
        r.push_back(p.residual);
    }
    return {{"m", m}, {"residual", r}};
}

json coeffs_json(const ValueCoefficients& c) {
    return {{"a_neg", c.a_neg}, {"b_neg", c.b_neg}, {"a_pos", c.a_pos}, {"b_pos", c.b_pos}};
}

}  // namespace

json sell_record(const SellSolution& sol) {
    const auto& d = sol.diagnostics;
    json diag = {{"root_count", d.root_count},
                 {"multiple_roots", d.multiple_roots},
                 {"pasting_residual", d.pasting_residual},
                 {"c3_denominator", d.c3_denominator},
                 {"c1_scan", samples(d.c1_scan)},
                 {"c2_scan", samples(d.c2_scan)}};
    return {{"case", std::string(to_string(sol.case_tag))},
            {"m_hat", sol.m_hat},
            {"coeffs", coeffs_json(sol.coeffs)},
            {"basis", "phi_minus, psi_minus(L,H), phi_plus(L,M), psi_plus(L,M)"},
            {"diagnostics", diag}};
}

json buy_record(const BuySolution& sol) {
    json rec = sell_record(sol.sell());
    rec["B"] = sol.B();
    rec["kappa"] = sol.kappa();
    rec["psi_normalization"] = std::string(to_string(sol.normalization()));
    rec["derivative_mismatch_at_B"] = sol.derivative_mismatch();
    if (sol.normalization() == PsiNormalization::AnchoredAtCap) rec["rho_limit_at_cap"] = sol.rho_limit_at_cap();
    return rec;
}

json estimate_record(const McEstimate& e) {
    return {{"mean", e.mean},
            {"std_error", e.std_error},
            {"n_paths", e.n_paths},
            {"seed", e.seed},
            {"truncated_fraction", e.truncated_fraction},
            {"horizon_warning", e.horizon_warning}};
}

StopLossValue value_from_record(const Model& model, std::shared_ptr<const Fundamentals> funds, const json& record) {
    try {
        const auto& c = record.at("coeffs");
        const ValueCoefficients coeffs{c.at("a_neg").get<double>(), c.at("b_neg").get<double>(),
                                       c.at("a_pos").get<double>(), c.at("b_pos").get<double>()};
        return StopLossValue(model, std::move(funds), record.at("m_hat").get<double>(),
                             parse_case(record.at("case").get<std::string>()), coeffs);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed solution record: ") + e.what());
    }
}

}  // namespace supres
