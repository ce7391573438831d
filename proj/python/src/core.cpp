// SPDX-License-Identifier: MIT
#include "supres/buy.hpp"
#include "supres/cli.hpp"
#include "supres/config.hpp"
#include "supres/errors.hpp"
#include "supres/mc.hpp"
#include "supres/sell.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace py = pybind11;
using namespace supres;

namespace {

Regime regime(const std::string& text) { return parse_regime(text); }

McConfig mc_config(std::uint64_t n_paths, double dt, std::uint64_t seed, double horizon, unsigned workers) {
    McConfig cfg;
    cfg.n_paths = n_paths;
    cfg.dt = dt;
    cfg.seed = seed;
    cfg.horizon = horizon;
    cfg.workers = workers;
    return cfg;
}

py::dict coeffs_dict(const ValueCoefficients& c) {
    py::dict d;
    d["a_neg"] = c.a_neg;
    d["b_neg"] = c.b_neg;
    d["a_pos"] = c.a_pos;
    d["b_pos"] = c.b_pos;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Optimal selling and buying with hysteretic regime switching";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    m.def(
        "lognormal_roots",
        [](double sigma2, double mu, double r) {
            const auto rt = lognormal_roots(sigma2, mu, r);
            return py::make_tuple(rt.alpha, rt.beta);
        },
        py::arg("sigma2"), py::arg("mu"), py::arg("r"));

    py::class_<ModelSpec>(m, "ModelSpec")
        .def_readonly("L", &ModelSpec::L)
        .def_readonly("H", &ModelSpec::H)
        .def_readonly("M", &ModelSpec::M)
        .def_readonly("r", &ModelSpec::r)
        .def("__repr__", [](const ModelSpec& s) { return "ModelSpec(" + model_to_json(s).dump() + ")"; });

    m.def(
        "lognormal_model",
        [](double L, double H, double M, double r, double mu_pos, double sigma_pos, double mu_neg, double sigma_neg) {
            ModelSpec s;
            s.L = L;
            s.H = H;
            s.M = M;
            s.r = r;
            s.pos = Lognormal{mu_pos, sigma_pos};
            s.neg = Lognormal{mu_neg, sigma_neg};
            Model::validate(s);
            return s;
        },
        py::arg("L"), py::arg("H"), py::arg("M"), py::arg("r"), py::arg("mu_pos"), py::arg("sigma_pos"),
        py::arg("mu_neg"), py::arg("sigma_neg"));

    m.def(
        "model_from_config",
        [](const std::string& path, const std::vector<std::string>& overrides) {
            return load_config(path, overrides).model;
        },
        py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

    py::class_<SellSolution>(m, "SellSolution")
        .def_property_readonly("case", [](const SellSolution& s) { return std::string(to_string(s.case_tag)); })
        .def_readonly("m_hat", &SellSolution::m_hat)
        .def_property_readonly("coeffs", [](const SellSolution& s) { return coeffs_dict(s.coeffs); })
        .def_property_readonly("pasting_residual",
                               [](const SellSolution& s) { return s.diagnostics.pasting_residual; })
        .def_property_readonly("multiple_roots", [](const SellSolution& s) { return s.diagnostics.multiple_roots; })
        .def(
            "value", [](const SellSolution& s, double x, const std::string& f) { return value_sell(s, x, regime(f)); },
            py::arg("x"), py::arg("regime"))
        .def(
            "derivative",
            [](const SellSolution& s, double x, const std::string& f) { return value_sell_derivative(s, x, regime(f)); },
            py::arg("x"), py::arg("regime"))
        .def(
            "stop_loss_value",
            [](const SellSolution& s, double level, double x, const std::string& f) {
                const StopLossValue v(s.value_fn.model(), s.value_fn.fundamentals_ptr(), level);
                return v.value(x, regime(f));
            },
            py::arg("m"), py::arg("x"), py::arg("regime"));

    m.def(
        "solve_sell",
        [](const ModelSpec& spec, std::size_t grid_n, double tol_paste) {
            SellOptions opts;
            opts.grid_n = grid_n;
            opts.tol_paste = tol_paste;
            return classify_and_solve(Model::validate(spec), opts);
        },
        py::arg("spec"), py::arg("grid_n") = 400, py::arg("tol_paste") = 1e-9);

    py::class_<BuySolution>(m, "BuySolution")
        .def_property_readonly("B", &BuySolution::B)
        .def_property_readonly("kappa", &BuySolution::kappa)
        .def_property_readonly("normalization",
                               [](const BuySolution& b) { return std::string(to_string(b.normalization())); })
        .def("rho", &BuySolution::rho, py::arg("x"))
        .def(
            "value", [](const BuySolution& b, double x, const std::string& f) { return b.value(x, regime(f)); },
            py::arg("x"), py::arg("regime"))
        .def(
            "gain", [](const BuySolution& b, double x, const std::string& f) { return gain(b.sell(), x, regime(f)); },
            py::arg("x"), py::arg("regime"));

    m.def(
        "find_B",
        [](const SellSolution& sell, const std::string& normalization, std::size_t grid_n) {
            BuyOptions opts;
            opts.normalization = parse_psi_normalization(normalization);
            opts.grid_n = grid_n;
            return find_B(sell, opts);
        },
        py::arg("sell"), py::arg("normalization") = "decay_at_infinity", py::arg("grid_n") = 2000);

    py::class_<McEstimate>(m, "McEstimate")
        .def_readonly("mean", &McEstimate::mean)
        .def_readonly("std_error", &McEstimate::std_error)
        .def_readonly("n_paths", &McEstimate::n_paths)
        .def_readonly("seed", &McEstimate::seed)
        .def_readonly("truncated_fraction", &McEstimate::truncated_fraction)
        .def_readonly("horizon_warning", &McEstimate::horizon_warning)
        .def("__repr__", [](const McEstimate& e) {
            return "McEstimate(mean=" + std::to_string(e.mean) + ", std_error=" + std::to_string(e.std_error) + ")";
        });

    m.def(
        "simulate_stop_loss",
        [](const ModelSpec& spec, double x0, const std::string& f, double level, std::uint64_t n_paths, double dt,
           std::uint64_t seed, double horizon, unsigned workers) {
            const McConfig cfg = mc_config(n_paths, dt, seed, horizon, workers);
            py::gil_scoped_release nogil;
            return run_rule(spec, x0, regime(f), SellAtStopLoss{level}, cfg);
        },
        py::arg("spec"), py::arg("x0"), py::arg("regime"), py::arg("m"), py::arg("n_paths") = 100000,
        py::arg("dt") = 1e-3, py::arg("seed") = 20240601, py::arg("horizon") = 200.0, py::arg("workers") = 0);

    m.def(
        "simulate_buy",
        [](const BuySolution& buy, double x0, const std::string& f, std::uint64_t n_paths, double dt,
           std::uint64_t seed, double horizon, unsigned workers) {
            const McConfig cfg = mc_config(n_paths, dt, seed, horizon, workers);
            const ModelSpec spec = buy.sell().value_fn.model().spec();
            const auto rule = buy_rule(buy);
            py::gil_scoped_release nogil;
            return run_rule(spec, x0, regime(f), rule, cfg);
        },
        py::arg("buy"), py::arg("x0"), py::arg("regime"), py::arg("n_paths") = 100000, py::arg("dt") = 1e-3,
        py::arg("seed") = 20240601, py::arg("horizon") = 200.0, py::arg("workers") = 0);

    m.def(
        "run_cli",
        [](const std::string& command, const std::string& config, const std::vector<std::string>& overrides,
           std::optional<std::string> out) {
            py::gil_scoped_release nogil;
            return cli::run({command, config, overrides, out}, std::cerr);
        },
        py::arg("command"), py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
        py::arg("out") = std::nullopt);
}
