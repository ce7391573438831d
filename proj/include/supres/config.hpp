// SPDX-License-Identifier: MIT
//
// Run configuration: a JSON document with "schema_version": 1.
#pragma once

#include "supres/buy.hpp"
#include "supres/mc.hpp"
#include "supres/model.hpp"

#include <json.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace supres {

inline constexpr int kSchemaVersion = 1;

struct SolverSettings {
    std::size_t grid_n = 400;
    double tol_paste = 1e-9;
    double tol_ode = 1e-8;
    std::size_t buy_grid_n = 2000;
    PsiNormalization psi_normalization = PsiNormalization::DecayAtInfinity;
    std::size_t table_points = 200;  // value-table rows, x = M·i/n
};

enum class RuleKind { OptimalSell, StopLoss, SellImmediately, SellAtCap, OptimalBuy };

std::string_view to_string(RuleKind k) noexcept;
RuleKind parse_rule_kind(std::string_view text);

struct SimulateSettings {
    double x0 = 1.5;
    Regime regime = Regime::Positive;
    RuleKind rule = RuleKind::OptimalSell;
    double m = 0.0;  // StopLoss only
};

struct SweepSettings {
    double x0 = 1.5;
    Regime regime = Regime::Negative;
    std::vector<double> m_grid;
};

struct CheckSettings {
    double x0 = 1.5;
    Regime regime = Regime::Positive;
    double t_check = 1.0;
    std::size_t grid_n = 1000;
    std::size_t sweep_n = 50;
};

struct OutputSettings {
    std::string directory = ".";
    bool json = true;
    bool csv = true;
};

struct RunConfig {
    ModelSpec model;
    SolverSettings solver;
    McConfig mc;
    SimulateSettings simulate;
    SweepSettings sweep;
    CheckSettings check;
    OutputSettings output;
};

/// Reads and parses a JSON file. Throws ConfigError.
nlohmann::json read_config_document(const std::string& path);

/// Applies "a.b.c=value" overrides. The value is parsed as JSON when
/// possible and kept as a string otherwise. Missing objects are created.
void apply_overrides(nlohmann::json& doc, const std::vector<std::string>& overrides);

/// Throws ConfigError for a malformed document. Model invariants are not
/// checked here (Model::validate does that).
RunConfig parse_config(const nlohmann::json& doc);

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Inverse of the "model" section, for echoing in output records.
nlohmann::json model_to_json(const ModelSpec& spec);

}  // namespace supres
