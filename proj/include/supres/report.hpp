// SPDX-License-Identifier: MIT
//
// Machine-readable output: JSON records and CSV tables. Numbers are written
// in shortest round-trip form, so a record read back reproduces every bit.
#pragma once

#include "supres/buy.hpp"
#include "supres/mc.hpp"
#include "supres/sell.hpp"

#include <json.hpp>

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace supres {

/// Shortest decimal that parses back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double x);

/// Rows x = M·i/n, i = 1..n. Columns x, v_plus, v_minus, dv_plus, dv_minus;
/// cells outside the reachable set are empty.
std::string sell_table_csv(const StopLossValue& v, std::size_t n);
/// sell_table_csv columns followed by g_plus, rho, u_plus, u_minus.
std::string buy_table_csv(const BuySolution& b, std::size_t n);

nlohmann::json sell_record(const SellSolution& sol);
nlohmann::json buy_record(const BuySolution& sol);
nlohmann::json estimate_record(const McEstimate& e);

/// Value function rebuilt from a sell record's case, m_hat and coefficients.
StopLossValue value_from_record(const Model& model, std::shared_ptr<const Fundamentals> funds,
                                const nlohmann::json& record);

/// CSV with a header row; cells already formatted.
std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

}  // namespace supres
