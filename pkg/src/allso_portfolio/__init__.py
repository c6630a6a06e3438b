"""Cardinality- and turnover-constrained Sharpe-ratio portfolios via level-based swarm optimisation."""

from .backtest import BacktestConfig, BacktestLedger, run_backtest, transaction_cost
from .estimation import PricePanel, compute_returns, estimate_model, load_prices, synthetic_prices
from .model import ConstraintSpec, MarketModel, Portfolio, is_feasible, modified_sharpe, objective
from .projection import FeasibleSetB, project_onto_B
from .swarm import RunResult, SwarmConfig, run

__all__ = [
    "BacktestConfig",
    "BacktestLedger",
    "ConstraintSpec",
    "FeasibleSetB",
    "MarketModel",
    "Portfolio",
    "PricePanel",
    "RunResult",
    "SwarmConfig",
    "compute_returns",
    "estimate_model",
    "is_feasible",
    "load_prices",
    "modified_sharpe",
    "objective",
    "project_onto_B",
    "run",
    "run_backtest",
    "synthetic_prices",
    "transaction_cost",
]
__version__ = "0.1.0"
