"""Optimal selling and buying when prices switch regime at support and resistance levels."""

from ._core import (
    BuySolution,
    ConfigError,
    DomainError,
    McEstimate,
    ModelSpec,
    NumericalError,
    SellSolution,
    ValidationError,
    find_B,
    lognormal_model,
    lognormal_roots,
    model_from_config,
    run_cli,
    simulate_buy,
    simulate_stop_loss,
    solve_sell,
)

__all__ = [
    "BuySolution",
    "ConfigError",
    "DomainError",
    "McEstimate",
    "ModelSpec",
    "NumericalError",
    "SellSolution",
    "ValidationError",
    "find_B",
    "lognormal_model",
    "lognormal_roots",
    "model_from_config",
    "run_cli",
    "simulate_buy",
    "simulate_stop_loss",
    "solve_sell",
]
