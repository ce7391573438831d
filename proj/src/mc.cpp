// SPDX-License-Identifier: MIT
#include "supres/mc.hpp"

#include "supres/errors.hpp"
#include "supres/sell.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>

namespace supres {

std::string_view to_string(Scheme s) noexcept {
    switch (s) {
        case Scheme::Auto: return "auto";
        case Scheme::EulerMaruyama: return "euler";
        case Scheme::ExactLognormalStep: return "exact";
    }
    return "auto";
}

Scheme parse_scheme(std::string_view text) {
    if (text == "auto") return Scheme::Auto;
    if (text == "euler") return Scheme::EulerMaruyama;
    if (text == "exact") return Scheme::ExactLognormalStep;
    throw ConfigError("unknown scheme '" + std::string(text) + "' (expected auto, euler or exact)");
}

namespace {

constexpr double kMaxGridSteps = 4503599627370496.0;  // 2^52
// Bridge crossing tolerance 1e-12 per block and level: -log(1e-12).
constexpr double kBridgeExponent = 27.631021115928547;
constexpr std::uint64_t kBlock = 1024;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// SplitMix64; seeded per Brownian node.
struct SplitMix64 {
    using result_type = std::uint64_t;
    std::uint64_t state;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return mix64(state += 0x9E3779B97F4A7C15ULL); }
};

std::uint64_t grid_steps(double span, double dt) {
    return static_cast<std::uint64_t>(std::ceil(span / dt - 1e-9));
}

}  // namespace

void validate(const McConfig& cfg) {
    if (cfg.n_paths < 1) throw ConfigError("mc: n_paths must be at least 1");
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("mc: dt must be positive");
    if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) throw ConfigError("mc: horizon must be positive");
    if (cfg.horizon / cfg.dt > kMaxGridSteps) throw ConfigError("mc: horizon/dt exceeds 2^52 grid steps");
}

unsigned resolve_workers(const McConfig& cfg) {
    if (cfg.workers > 0) return cfg.workers;
    if (const char* env = std::getenv("SUPRES_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && n > 0) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// Brownian path

BrownianPath::BrownianPath(std::uint64_t seed, std::uint64_t path_index, std::uint64_t n_steps, double dt)
    : key_(mix64(mix64(seed) + 0x9E3779B97F4A7C15ULL * (path_index + 1))), dt_(dt) {
    int depth = 0;
    while ((std::uint64_t{1} << depth) < std::max<std::uint64_t>(n_steps, 1)) ++depth;
    const std::uint64_t top = std::uint64_t{1} << depth;
    stack_.reserve(static_cast<std::size_t>(depth) + 1);
    stack_.push_back({0, top, 0.0, std::sqrt(static_cast<double>(top) * dt_) * normal(0)});
}

double BrownianPath::normal(std::uint64_t node) const {
    SplitMix64 eng{key_ ^ mix64(node + 0xD1B54A32D192ED03ULL)};
    boost::random::normal_distribution<double> nd;
    return nd(eng);
}

double BrownianPath::at(std::uint64_t j) {
    while (stack_.size() > 1 && !(stack_.back().a <= j && j <= stack_.back().b)) stack_.pop_back();
    if (j > stack_.front().b) throw std::out_of_range("BrownianPath: index beyond the simulated grid");
    for (;;) {
        const Level lv = stack_.back();
        if (j == lv.a) return lv.wa;
        if (j == lv.b) return lv.wb;
        const std::uint64_t len = lv.b - lv.a;
        const std::uint64_t mid = lv.a + len / 2;
        // Heap numbering of the node: depth d, offset a/len.
        const std::uint64_t d = stack_.size() - 1;
        const std::uint64_t node = (std::uint64_t{1} << d) + lv.a / len;
        const double wm = 0.5 * (lv.wa + lv.wb) + std::sqrt(0.25 * static_cast<double>(len) * dt_) * normal(node);
        if (j < mid)
            stack_.push_back({lv.a, mid, lv.wa, wm});
        else
            stack_.push_back({mid, lv.b, wm, lv.wb});
    }
}

// ---------------------------------------------------------------------------
// dynamics

namespace {

struct RegimeDyn {
    const DynamicsSpec* dyn;
    bool exact;
    double nu;     // log drift (exact)
    double sigma;  // log volatility (exact)
};

RegimeDyn regime_dyn(const ModelSpec& spec, Regime f, Scheme scheme) {
    const auto& d = spec.dynamics(f);
    const auto* ln = std::get_if<Lognormal>(&d);
    if (scheme == Scheme::ExactLognormalStep && !ln)
        throw ConfigError("mc: the exact scheme needs lognormal dynamics in both regimes");
    const bool exact = ln && scheme != Scheme::EulerMaruyama;
    if (exact) return {&d, true, ln->mu_rate - 0.5 * ln->sigma_rate * ln->sigma_rate, ln->sigma_rate};
    return {&d, false, 0.0, 0.0};
}

// Returns the new price; sets `absorbed` for Euler paths reaching the floor.
double advance(const RegimeDyn& rd, double s, double dt, double dw, bool& absorbed) {
    if (rd.exact) return s * std::exp(rd.nu * dt + rd.sigma * dw);
    const auto c = coefficients(*rd.dyn, s);
    const double next = s + c.drift * dt + c.volatility * dw;
    if (next <= kAbsorbFloor) {
        absorbed = true;
        return kAbsorbFloor;
    }
    return next;
}

void apply_switch(const ModelSpec& spec, double s, Regime& f) {
    if (f == Regime::Positive && s <= spec.L)
        f = Regime::Negative;
    else if (f == Regime::Negative && s >= spec.H)
        f = Regime::Positive;
}

void check_spec(const ModelSpec& spec) {
    if (!(spec.L > 0.0 && spec.L < spec.H && spec.H <= spec.M))
        throw ConfigError("mc: levels must satisfy 0 < L < H <= M");
    if (!(spec.r > 0.0)) throw ConfigError("mc: r must be positive");
}

void check_start(const ModelSpec& spec, double x0, Regime f0) {
    if (!(x0 > 0.0) || !std::isfinite(x0)) throw DomainError("mc: start price must be positive");
    if (f0 == Regime::Positive && x0 < spec.L) throw DomainError("mc: (x, +) needs x >= L");
    if (f0 == Regime::Negative && x0 > spec.H) throw DomainError("mc: (x, -) needs x <= H");
}

}  // namespace

PathState step(const ModelSpec& spec, const PathState& state, double dt, double normal_draw, Scheme scheme) {
    if (!(dt > 0.0)) throw ConfigError("step: dt must be positive");
    PathState out = state;
    out.t = state.t + dt;
    if (state.absorbed) return out;
    const RegimeDyn rd = regime_dyn(spec, state.f, scheme);
    out.s = advance(rd, state.s, dt, std::sqrt(dt) * normal_draw, out.absorbed);
    apply_switch(spec, out.s, out.f);
    return out;
}

std::vector<PathState> simulate_path(const ModelSpec& spec, double x0, Regime f0, std::uint64_t n_steps,
                                     const McConfig& cfg, std::uint64_t path_index) {
    validate(cfg);
    check_spec(spec);
    check_start(spec, x0, f0);
    const RegimeDyn dyn[2] = {regime_dyn(spec, Regime::Positive, cfg.scheme),
                              regime_dyn(spec, Regime::Negative, cfg.scheme)};
    BrownianPath w(cfg.seed, path_index, n_steps, cfg.dt);
    std::vector<PathState> out;
    out.reserve(static_cast<std::size_t>(n_steps) + 1);
    PathState st{0.0, x0, f0, false};
    out.push_back(st);
    double w_prev = 0.0;
    for (std::uint64_t j = 1; j <= n_steps && !st.absorbed; ++j) {
        const double w_next = w.at(j);
        const auto& rd = dyn[st.f == Regime::Positive ? 0 : 1];
        st.s = advance(rd, st.s, cfg.dt, w_next - w_prev, st.absorbed);
        st.t = static_cast<double>(j) * cfg.dt;
        apply_switch(spec, st.s, st.f);
        out.push_back(st);
        w_prev = w_next;
    }
    return out;
}

// ---------------------------------------------------------------------------
// rule kernels

namespace {

struct Kernel {
    bool buy = false;
    double m = 0.0;    // sell stop-loss level, 0 for none
    bool cap = true;   // S ≥ M in the positive regime ends the path
    double B = 0.0;    // buy threshold
};

struct Outcome {
    std::uint64_t j;
    double s;
    Regime f;
    bool stopped;
};

// Applies the move to s_new, then the switch rule and the rule's triggers.
// On a trigger, (s, f) become the continuous-time stopping state: the
// crossed level, not the overshoot.
bool resolve(const Kernel& k, const ModelSpec& spec, double s_new, bool absorbed, double& s, Regime& f) {
    const double L = spec.L, H = spec.H, M = spec.M;
    if (!k.buy) {
        if (f == Regime::Positive) {
            if (s_new >= M) {
                s = M;
                return true;
            }
            s = s_new;
            if (s_new <= L) {
                f = Regime::Negative;
                if (s_new <= k.m) {
                    s = L <= k.m ? L : k.m;
                    return true;
                }
                return absorbed;
            }
            return false;
        }
        if (s_new <= k.m) {
            s = k.m;
            return true;
        }
        s = s_new;
        if (s_new >= H) {
            f = Regime::Positive;
            if (s_new >= M) {
                s = M;
                return true;
            }
        }
        return absorbed;
    }

    if (f == Regime::Positive) {
        if (s_new <= k.B) {
            s = k.B;
            return true;
        }
        if (k.cap && s_new >= M) {
            s = M;
            return true;
        }
        s = s_new;
        return false;
    }
    s = s_new;
    if (s_new >= H) {
        f = Regime::Positive;
        if (H <= k.B) {
            s = H;
            return true;
        }
        if (k.cap && s_new >= M) {
            s = M;
            return true;
        }
        return false;
    }
    return absorbed;
}

// Trigger at t = 0.
bool immediate(const Kernel& k, const ModelSpec& spec, double x0, Regime f0) {
    if (!k.buy) return (f0 == Regime::Positive && x0 >= spec.M) || (f0 == Regime::Negative && x0 <= k.m);
    return f0 == Regime::Positive && (x0 <= k.B || (k.cap && x0 >= spec.M));
}

struct Walker {
    const ModelSpec& spec;
    RegimeDyn dyn[2];
    Kernel kernel;
    double dt;

    Walker(const ModelSpec& s, Scheme scheme, Kernel k, double dt_)
        : spec(s),
          dyn{regime_dyn(s, Regime::Positive, scheme), regime_dyn(s, Regime::Negative, scheme)},
          kernel(k),
          dt(dt_) {}

    // Log levels that can change the state in regime f; ±inf when absent.
    void log_levels(Regime f, double& lo, double& hi) const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        double a, b;
        if (f == Regime::Positive) {
            a = kernel.buy ? kernel.B : spec.L;
            b = kernel.cap ? spec.M : inf;
        } else {
            a = kernel.buy ? 0.0 : kernel.m;
            b = spec.H;
        }
        lo = a > 0.0 ? std::log(a) : -inf;
        hi = std::isfinite(b) ? std::log(b) : inf;
    }

    // One grid step with end-of-step detection. Returns true when the rule fires.
    bool grid_step(BrownianPath& w, const RegimeDyn& rd, std::uint64_t& j, double& w_j, double& s, Regime& f) const {
        const double w_next = w.at(j + 1);
        bool absorbed = false;
        const double s_new = advance(rd, s, dt, w_next - w_j, absorbed);
        ++j;
        w_j = w_next;
        return resolve(kernel, spec, s_new, absorbed, s, f);
    }

    // Lognormal regimes walk the Lévy tree in aligned dyadic blocks. A block
    // is taken whole when its end stays inside the levels and the bridge
    // between its endpoints crosses a level with probability below 1e-12;
    // otherwise it is halved. Single steps use end-of-step
    // detection, so the outcome is that of grid monitoring.
    Outcome walk(BrownianPath& w, double x0, Regime f0, std::uint64_t max_steps) const {
        double s = x0;
        Regime f = f0;
        if (immediate(kernel, spec, x0, f0)) return {0, s, f, true};
        std::uint64_t j = 0;
        double w_j = 0.0;
        while (j < max_steps) {
            const RegimeDyn& rd = dyn[f == Regime::Positive ? 0 : 1];
            if (!rd.exact) {
                if (grid_step(w, rd, j, w_j, s, f)) return {j, s, f, true};
                continue;
            }
            double lo, hi;
            log_levels(f, lo, hi);
            const Regime f_seg = f;
            const double bound = kBridgeExponent * rd.sigma * rd.sigma * dt;
            double y = std::log(s);
            std::uint64_t len = 1;
            while (j < max_steps && f == f_seg) {
                while (j % (2 * len) == 0 && j + 2 * len <= max_steps) len *= 2;
                while (j + len > max_steps) len /= 2;
                for (;;) {
                    if (len == 1) {
                        if (grid_step(w, rd, j, w_j, s, f)) return {j, s, f, true};
                        y = std::log(s);
                        break;
                    }
                    const double w_end = w.at(j + len);
                    const double dl = static_cast<double>(len);
                    const double y_end = y + rd.nu * dl * dt + rd.sigma * (w_end - w_j);
                    // exp(-2 a0 a1 / (σ² Δ)) ≤ tol for both levels.
                    const double a0 = y - lo, a1 = y_end - lo, b0 = hi - y, b1 = hi - y_end;
                    const bool safe = a1 > 0.0 && b1 > 0.0 && 2.0 * a0 * a1 >= bound * dl && 2.0 * b0 * b1 >= bound * dl;
                    if (safe) {
                        j += len;
                        w_j = w_end;
                        y = y_end;
                        s = std::exp(y);
                        break;
                    }
                    len /= 2;
                }
            }
        }
        return {j, s, f, false};
    }
};

struct Block {
    double n = 0.0;
    double mean = 0.0;
    double m2 = 0.0;
    std::uint64_t truncated = 0;
    std::uint64_t stopped = 0;

    void add(double x) {
        n += 1.0;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    void merge(const Block& o) {
        if (o.n == 0.0) return;
        const double nt = n + o.n;
        const double d = o.mean - mean;
        mean += d * o.n / nt;
        m2 += o.m2 + d * d * n * o.n / nt;
        n = nt;
        truncated += o.truncated;
        stopped += o.stopped;
    }
};

struct PathResult {
    double payoff;
    bool truncated;
    bool stopped;
};

// Fixed blocks reduced in index order: the result does not depend on the
// number of workers or on scheduling.
template <class PathFn>
Block run_paths(const McConfig& cfg, PathFn fn) {
    const std::uint64_t n = cfg.n_paths;
    const std::uint64_t n_blocks = (n + kBlock - 1) / kBlock;
    std::vector<Block> blocks(n_blocks);
    std::atomic<std::uint64_t> next{0};

    auto work = [&] {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            Block blk;
            const std::uint64_t end = std::min(n, (b + 1) * kBlock);
            for (std::uint64_t p = b * kBlock; p < end; ++p) {
                const PathResult r = fn(p);
                blk.add(r.payoff);
                blk.truncated += r.truncated ? 1 : 0;
                blk.stopped += r.stopped ? 1 : 0;
            }
            blocks[b] = blk;
        }
    };

    const unsigned workers =
        static_cast<unsigned>(std::min<std::uint64_t>(resolve_workers(cfg), std::max<std::uint64_t>(n_blocks, 1)));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    Block total;
    for (const auto& b : blocks) total.merge(b);
    return total;
}

McEstimate to_estimate(const Block& b, const McConfig& cfg) {
    McEstimate e;
    e.n_paths = cfg.n_paths;
    e.seed = cfg.seed;
    e.mean = b.mean;
    e.std_error = b.n > 1.0 ? std::sqrt(b.m2 / (b.n - 1.0) / b.n) : 0.0;
    e.truncated_fraction = static_cast<double>(b.truncated) / b.n;
    e.horizon_warning = e.truncated_fraction > 0.05;
    return e;
}

Kernel kernel_for(const ModelSpec& spec, const Rule& rule) {
    Kernel k;
    if (const auto* sl = std::get_if<SellAtStopLoss>(&rule)) {
        if (!(sl->m >= 0.0 && sl->m < spec.M)) throw ConfigError("mc: stop-loss level must lie in [0, M)");
        k.m = sl->m;
    } else if (const auto* br = std::get_if<BuyAtThreshold>(&rule)) {
        if (!(br->B >= spec.L && br->B <= spec.M)) throw ConfigError("mc: buy threshold must lie in [L, M]");
        if (!br->gain) throw ConfigError("mc: buy rule needs a gain function");
        k.buy = true;
        k.B = br->B;
        k.cap = br->forfeit_at_cap;
    }
    return k;
}

}  // namespace

McEstimate run_rule(const ModelSpec& spec, double x0, Regime f0, const Rule& rule, const McConfig& cfg) {
    validate(cfg);
    check_spec(spec);
    check_start(spec, x0, f0);

    if (std::holds_alternative<SellImmediately>(rule)) {
        McEstimate e;
        e.mean = x0;
        e.n_paths = cfg.n_paths;
        e.seed = cfg.seed;
        return e;
    }

    const Kernel kernel = kernel_for(spec, rule);
    const Walker walker(spec, cfg.scheme, kernel, cfg.dt);
    const std::uint64_t max_steps = grid_steps(cfg.horizon, cfg.dt);
    const double r = spec.r;
    const auto* buy = std::get_if<BuyAtThreshold>(&rule);

    const Block b = run_paths(cfg, [&](std::uint64_t p) {
        BrownianPath w(cfg.seed, p, max_steps, cfg.dt);
        const Outcome o = walker.walk(w, x0, f0, max_steps);
        const double disc = std::exp(-r * static_cast<double>(o.j) * cfg.dt);
        double payoff = 0.0;
        if (disc > 0.0) payoff = disc * (buy ? buy->gain(o.s, o.f) : o.s);
        return PathResult{payoff, !o.stopped, o.stopped};
    });
    return to_estimate(b, cfg);
}

std::vector<std::pair<double, McEstimate>> sweep_stop_loss(const ModelSpec& spec, double x0, Regime f0,
                                                           const std::vector<double>& m_grid, const McConfig& cfg) {
    std::vector<std::pair<double, McEstimate>> out;
    out.reserve(m_grid.size());
    for (double m : m_grid) {
        if (!(m >= 0.0 && m < spec.H)) throw ConfigError("sweep: stop-loss levels must lie in [0, H)");
        out.emplace_back(m, run_rule(spec, x0, f0, SellAtStopLoss{m}, cfg));
    }
    return out;
}

MartingaleDiagnostic martingale_check(const SellSolution& sol, double x0, Regime f0, double t_check,
                                      const McConfig& cfg, std::optional<double> m_override) {
    validate(cfg);
    if (!(t_check >= 0.0)) throw ConfigError("martingale_check: t_check must be nonnegative");
    const Model& model = sol.value_fn.model();
    const ModelSpec& spec = model.spec();
    check_start(spec, x0, f0);

    MartingaleDiagnostic d{};
    d.value = value_sell(sol, x0, f0);
    d.one_sided = m_override.has_value();
    const std::uint64_t n_check = grid_steps(t_check, cfg.dt);
    if (n_check == 0) {
        d.mean = d.value;
        d.pass = true;
        d.stopped_fraction = 0.0;
        return d;
    }

    Kernel k;
    k.m = m_override.value_or(sol.m_hat);
    if (!(k.m >= 0.0 && k.m < spec.H)) throw ConfigError("martingale_check: stop-loss level must lie in [0, H)");
    const Walker walker(spec, cfg.scheme, k, cfg.dt);
    const double r = spec.r;

    const Block b = run_paths(cfg, [&](std::uint64_t p) {
        BrownianPath w(cfg.seed, p, n_check, cfg.dt);
        const Outcome o = walker.walk(w, x0, f0, n_check);
        const double disc = std::exp(-r * static_cast<double>(o.j) * cfg.dt);
        return PathResult{disc * value_sell(sol, o.s, o.f), false, o.stopped};
    });
    const McEstimate e = to_estimate(b, cfg);
    d.mean = e.mean;
    d.std_error = e.std_error;
    d.difference = e.mean - d.value;
    d.stopped_fraction = static_cast<double>(b.stopped) / b.n;
    d.pass = d.one_sided ? d.difference <= 3.0 * d.std_error : std::abs(d.difference) <= 3.0 * d.std_error;
    return d;
}

}  // namespace supres
