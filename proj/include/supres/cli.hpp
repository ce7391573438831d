// SPDX-License-Identifier: MIT
//
//   supres <command> --config <path> [--set key=value ...] [--out <dir>]
//
// Commands: solve-sell, solve-buy, simulate, sweep, check.
// Exit codes: 0 success, 1 validation/config error, 2 numerical failure,
// 3 check-suite failure. Errors are also written to stderr as one JSON line.
#pragma once

#include "supres/buy.hpp"
#include "supres/config.hpp"
#include "supres/sell.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace supres::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2, kCheckFailed = 3 };

struct Invocation {
    std::string command;
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::string> out_dir;
};

int run(const Invocation& inv, std::ostream& err);

/// Parses argv and calls run().
int main(int argc, char** argv);

struct CheckItem {
    std::string name;
    bool pass;
    double measured;   // worst observed value of the checked quantity
    double tolerance;
};

/// Invariant suite behind `check`: domination, monotone gain, pasting,
/// ODE residuals, analytic sweep optimality, martingale diagnostic and
/// the buying-side properties.
std::vector<CheckItem> run_check_suite(const RunConfig& cfg, const SellSolution& sell, const BuySolution& buy);

/// Fundamentals and solver options as configured.
Fundamentals configured_fundamentals(const Model& model, const RunConfig& cfg);
SellOptions configured_sell_options(const RunConfig& cfg);
BuyOptions configured_buy_options(const RunConfig& cfg);

}  // namespace supres::cli
