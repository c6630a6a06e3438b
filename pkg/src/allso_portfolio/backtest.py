"""Rolling-window out-of-sample backtest with tiered transaction costs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .estimation import PricePanel, compute_returns, estimate_model
from .model import ConstraintSpec, resolve_cardinality
from .swarm import SwarmConfig, run


class BacktestError(RuntimeError):
    pass


@dataclass(frozen=True)
class CostTier:
    lower: float
    upper: float
    fixed: float
    rate: float


# per-asset traded value brackets (lower bound inclusive): fixed fee in currency, proportional rate
DEFAULT_TIERS = (
    CostTier(0.0, 8_000.0, 40.0, 0.0),
    CostTier(8_000.0, 50_000.0, 0.0, 0.005),
    CostTier(50_000.0, 100_000.0, 0.0, 0.004),
    CostTier(100_000.0, 200_000.0, 0.0, 0.0025),
    CostTier(200_000.0, math.inf, 400.0, 0.0),
)
NO_TRADE = 1e-12


def validate_tiers(tiers) -> None:
    if not tiers or tiers[0].lower != 0.0 or tiers[-1].upper != math.inf:
        raise ValueError("cost tiers must cover [0, inf)")
    for a, b in zip(tiers, tiers[1:]):
        if a.upper != b.lower:
            raise ValueError(f"cost tiers not contiguous at {a.upper}")
    for t in tiers:
        if t.lower >= t.upper or t.fixed < 0 or t.rate < 0:
            raise ValueError(f"bad cost tier {t}")


@dataclass(frozen=True)
class BacktestConfig:
    window: int = 60
    horizon: int = 61
    W0: float = 10_000_000.0
    cost_tiers: tuple[CostTier, ...] = DEFAULT_TIERS
    k: int | float = 0.30
    l: float = 0.001
    u: float = 0.05
    TR: float = 0.20
    r_f: float = 0.0
    shrinkage: str | float = "none"
    periods_per_year: int = 12
    handler: str = "hybrid"
    mutation: bool = True
    algorithm: str = "allso"
    solver: SwarmConfig = field(default_factory=SwarmConfig)

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be >= 2")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.W0 <= 0:
            raise ValueError("W0 must be positive")
        validate_tiers(self.cost_tiers)

    def cardinality(self, n: int) -> int:
        """``k`` as an asset count; a value below 1 is read as a fraction of ``n``."""
        return resolve_cardinality(self.k, n)


@dataclass
class BacktestLedger:
    dates: list[str]
    weights: np.ndarray
    drifted: np.ndarray
    gross_return: np.ndarray
    cost: np.ndarray
    wealth: np.ndarray
    ret_out: np.ndarray
    turnover: np.ndarray
    W0: float
    benchmark_wealth: np.ndarray
    benchmark_label: str
    summary: dict = field(default_factory=dict)

    @property
    def n_assets(self) -> np.ndarray:
        return (self.weights > 0).sum(axis=1)

    @property
    def wealth_prev(self) -> np.ndarray:
        return np.concatenate([[self.W0], self.wealth[:-1]])


def drift_weights(x_prev, gross_prev) -> np.ndarray:
    x_prev = np.asarray(x_prev, dtype=float)
    grown = x_prev * np.asarray(gross_prev, dtype=float)
    total = grown.sum()
    if total <= 0:
        raise BacktestError("portfolio wiped out: drifted value is not positive")
    return grown / total


def tier_of(value: float, tiers=DEFAULT_TIERS) -> CostTier:
    for t in tiers:
        if t.lower <= value < t.upper:
            return t
    raise ValueError(f"no tier for traded value {value}")


def transaction_cost(x_new, x_old, wealth: float, tiers=DEFAULT_TIERS) -> float:
    traded = np.abs(np.asarray(x_new, dtype=float) - np.asarray(x_old, dtype=float)) * wealth
    total = 0.0
    for v in traded:
        if v <= NO_TRADE * wealth:
            continue
        t = tier_of(v, tiers)
        total += t.fixed + t.rate * v
    return total


def step_wealth(W_prev: float, r_out: float, cost: float) -> float:
    return W_prev * (1.0 + r_out) - cost


def drawdowns(wealth, W0: float) -> np.ndarray:
    w = np.asarray(wealth, dtype=float)
    peak = np.maximum.accumulate(np.concatenate([[W0], w]))[1:]
    return np.minimum(0.0, (w - peak) / peak)


def omega_ratio(r) -> float:
    r = np.asarray(r, dtype=float)
    losses = -r[r < 0].sum()
    gains = r[r > 0].sum()
    return math.inf if losses == 0 else float(gains / losses)


def cagr(W_end: float, W0: float, horizon: int, periods_per_year: int = 12) -> float:
    return float((W_end / W0) ** (periods_per_year / horizon) - 1.0)


def ex_post_metrics(ledger: BacktestLedger, periods_per_year: int = 12, allow_undefined: bool = False) -> dict:
    """Sharpe, Omega, CAGR, drawdown moments and cost statistics of a finished ledger.

    Sharpe and Omega use returns before costs; CAGR uses net wealth. With
    ``allow_undefined`` a one-period run reports a NaN Sharpe ratio instead of
    raising.
    """
    r = ledger.ret_out
    H = r.size
    if H < 2 and not allow_undefined:
        raise ValueError("ex-post metrics need at least 2 periods")
    sd = float(np.std(r, ddof=1)) if H >= 2 else math.nan
    if sd == 0.0 and not allow_undefined:
        raise ValueError("ex-post Sharpe ratio undefined: zero volatility")
    sr = float(r.mean()) / sd if sd and not math.isnan(sd) else math.nan
    dd = drawdowns(ledger.wealth, ledger.W0)
    return {
        "sharpe": sr,
        "omega": omega_ratio(r),
        "cagr": cagr(ledger.wealth[-1], ledger.W0, H, periods_per_year),
        "dd_mean": float(dd.mean()),
        "dd_std": float(dd.std(ddof=1)) if H >= 2 else 0.0,
        "cost_mean": float(ledger.cost.mean()),
        "cost_pct": float(np.mean(ledger.cost / ledger.wealth_prev) * 100.0),
    }


def run_backtest(panel: PricePanel, cfg: BacktestConfig, cap_weights=None, progress=None) -> BacktestLedger:
    """Re-estimate, re-optimise and rebalance once per period over ``cfg.horizon`` periods.

    ``cap_weights`` (``horizon x n`` or ``n``) switches the benchmark from equal
    weights to value weights.
    """
    need = cfg.window + cfg.horizon + 1
    if panel.T < need:
        raise BacktestError(f"backtest needs {need} price rows (window {cfg.window} + horizon {cfg.horizon} + 1), got {panel.T}")
    rets = compute_returns(panel)
    n, H = panel.n, cfg.horizon
    k = cfg.cardinality(n)
    weights = np.zeros((H, n))
    drifted = np.zeros((H, n))
    gross = np.zeros(H)
    cost = np.zeros(H)
    wealth = np.zeros(H)
    ret_out = np.zeros(H)
    turnover = np.zeros(H)
    W = cfg.W0
    x_prev = None
    for t in range(1, H + 1):
        est = slice(t - 1, cfg.window + t - 1)
        real = cfg.window + t - 1
        if x_prev is None:
            x_minus, TR = np.zeros(n), 1.0
        else:
            x_minus, TR = drift_weights(x_prev, rets.gross[real - 1]), cfg.TR
        try:
            model = estimate_model(type(rets)(rets.simple[est], rets.gross[est]), cfg.r_f, cfg.shrinkage)
            spec = ConstraintSpec.uniform(n, k, cfg.l, cfg.u, TR, x_minus)
            res = run(model, spec, replace(cfg.solver, seed=cfg.solver.seed + t), handler=cfg.handler,
                      mutation=cfg.mutation, algorithm=cfg.algorithm)
        except Exception as exc:
            raise BacktestError(f"period {t}: {exc}") from exc
        if not res.feasible:
            raise BacktestError(f"period {t}: solver returned an infeasible portfolio")
        x = res.best_x
        i = t - 1
        weights[i], drifted[i] = x, x_minus
        cost[i] = transaction_cost(x, x_minus, W, cfg.cost_tiers)
        ret_out[i] = float(x @ rets.simple[real])
        gross[i] = 1.0 + ret_out[i]
        turnover[i] = float(np.abs(x - x_minus).sum())
        W = step_wealth(W, ret_out[i], cost[i])
        wealth[i] = W
        x_prev = x
        if progress is not None:
            progress(t, W)

    realized = rets.simple[cfg.window : cfg.window + H]
    if cap_weights is None:
        bench_r, label = realized.mean(axis=1), "equal-weight"
    else:
        cw = np.broadcast_to(np.asarray(cap_weights, dtype=float), (H, n))
        bench_r, label = (cw * realized).sum(axis=1) / cw.sum(axis=1), "value-weight"
    ledger = BacktestLedger(
        dates=list(panel.dates[cfg.window + 1 : cfg.window + 1 + H]),
        weights=weights,
        drifted=drifted,
        gross_return=gross,
        cost=cost,
        wealth=wealth,
        ret_out=ret_out,
        turnover=turnover,
        W0=cfg.W0,
        benchmark_wealth=cfg.W0 * np.cumprod(1.0 + bench_r),
        benchmark_label=label,
    )
    ledger.summary = ex_post_metrics(ledger, cfg.periods_per_year, allow_undefined=True)
    return ledger


def write_ledger(ledger: BacktestLedger, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "date", "cost", "wealth", "ret_out", "turnover", "n_assets"])
        for i in range(ledger.wealth.size):
            w.writerow([i + 1, ledger.dates[i], repr(float(ledger.cost[i])), repr(float(ledger.wealth[i])),
                        repr(float(ledger.ret_out[i])), repr(float(ledger.turnover[i])), int(ledger.n_assets[i])])


def write_summary(ledger: BacktestLedger, path, extra: dict | None = None) -> None:
    lines = [f"{k} = {v!r}" for k, v in ledger.summary.items()]
    lines.append(f"benchmark = {ledger.benchmark_label}")
    lines.append(f"benchmark_final_wealth = {float(ledger.benchmark_wealth[-1])!r}")
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_weights(ledger: BacktestLedger, tickers, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *tickers])
        for d, row in zip(ledger.dates, ledger.weights):
            w.writerow([d, *(repr(float(v)) for v in row)])
