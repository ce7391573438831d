// SPDX-License-Identifier: MIT
//
// Monte Carlo simulation of the hysteretic two-regime price.
//
// Each path is driven by a Brownian motion sampled on the grid t_j = j·dt
// through a Lévy (midpoint bridge) construction whose node normals are a
// pure function of (seed, path index, node). A path is therefore the same
// object whatever the step sizes used to walk it, which gives exact common
// random numbers across rules and reproducibility across worker counts.
//
// Barrier monitoring is end-of-step on the dt grid. In lognormal regimes the
// walk takes whole dyadic blocks of the grid when the Brownian bridge between
// the block endpoints touches a level with probability below 1e-12, and
// splits the block otherwise, so the result is that of step-by-step
// monitoring at a fraction of the cost.
#pragma once

#include "supres/model.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace supres {

struct SellSolution;

enum class Scheme { Auto, EulerMaruyama, ExactLognormalStep };

std::string_view to_string(Scheme s) noexcept;
Scheme parse_scheme(std::string_view text);

struct McConfig {
    std::uint64_t n_paths = 100000;
    double dt = 1e-3;
    std::uint64_t seed = 20240601;
    double horizon = 200.0;
    Scheme scheme = Scheme::Auto;  // exact for lognormal regimes, Euler otherwise
    unsigned workers = 0;          // 0: SUPRES_THREADS, else hardware concurrency
};

/// Throws ConfigError for n_paths = 0, dt <= 0, horizon <= 0 or horizon/dt beyond 2^52.
void validate(const McConfig& cfg);

/// Worker count actually used for `cfg`.
unsigned resolve_workers(const McConfig& cfg);

/// Euler paths are absorbed at this price.
inline constexpr double kAbsorbFloor = 1e-12;

struct PathState {
    double t = 0.0;
    double s = 0.0;
    Regime f = Regime::Positive;
    bool absorbed = false;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 0;
    double truncated_fraction = 0.0;
    bool horizon_warning = false;  // truncated_fraction > 0.05
};

struct SellAtStopLoss {
    double m;  // 0 means never stop early
};
struct SellImmediately {};
struct SellAtCap {};

struct BuyAtThreshold {
    double B = 0.0;
    std::function<double(double, Regime)> gain;  // payoff at the purchase state
    bool forfeit_at_cap = false;                 // F = + and S ≥ M ends the path with gain(M, +)
};

using SellRule = std::variant<SellAtStopLoss, SellImmediately, SellAtCap>;
using Rule = std::variant<SellAtStopLoss, SellImmediately, SellAtCap, BuyAtThreshold>;

/// One grid step driven by a standard normal draw, followed by the switch
/// rule (+ → − at s ≤ L, − → + at s ≥ H).
PathState step(const ModelSpec& spec, const PathState& state, double dt, double normal_draw,
               Scheme scheme = Scheme::Auto);

/// Brownian motion of one path on the grid j·dt, j ∈ [0, n_steps].
class BrownianPath {
public:
    BrownianPath(std::uint64_t seed, std::uint64_t path_index, std::uint64_t n_steps, double dt);
    /// W(j·dt). Cheapest when queried with nondecreasing j.
    double at(std::uint64_t j);

private:
    struct Level {
        std::uint64_t a, b;
        double wa, wb;
    };
    double normal(std::uint64_t node) const;

    std::uint64_t key_;
    double dt_;
    std::vector<Level> stack_;
};

/// Unruled trajectory at full dt resolution, for path-level checks.
std::vector<PathState> simulate_path(const ModelSpec& spec, double x0, Regime f0, std::uint64_t n_steps,
                                     const McConfig& cfg, std::uint64_t path_index = 0);

/// Discounted payoff of `rule` from (x0, f0). Accepts unvalidated specs so
/// that degenerate drift orderings can be simulated; levels must be ordered.
McEstimate run_rule(const ModelSpec& spec, double x0, Regime f0, const Rule& rule, const McConfig& cfg);

/// Same seed for every level: common random numbers.
std::vector<std::pair<double, McEstimate>> sweep_stop_loss(const ModelSpec& spec, double x0, Regime f0,
                                                           const std::vector<double>& m_grid, const McConfig& cfg);

struct MartingaleDiagnostic {
    double mean;        // MC mean of e^{−r(t∧τ)} v(S_{t∧τ}, F_{t∧τ})
    double value;       // v(x0, f0)
    double difference;  // mean − value
    double std_error;
    bool one_sided;     // stop-loss override: only mean ≤ value + 3 SE is required
    bool pass;
    double stopped_fraction;
};

/// Stops at τ_M ∧ τ⁻_m with m = m̂ unless overridden.
MartingaleDiagnostic martingale_check(const SellSolution& sol, double x0, Regime f0, double t_check,
                                      const McConfig& cfg, std::optional<double> m_override = std::nullopt);

}  // namespace supres
