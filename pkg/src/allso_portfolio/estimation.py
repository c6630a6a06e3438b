"""Price panels, returns and the market-model estimator."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .model import MarketModel


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class PricePanel:
    tickers: list[str]
    dates: list[str]
    prices: np.ndarray

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 2 or prices.shape != (len(self.dates), len(self.tickers)):
            raise DataError("price matrix shape does not match dates x tickers")
        if prices.shape[0] < 3:
            raise DataError(f"need at least 3 price rows, got {prices.shape[0]}")
        if prices.shape[1] == 0:
            raise DataError("price panel has no assets")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise DataError("prices must be finite and strictly positive")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        object.__setattr__(self, "prices", prices)

    @property
    def n(self) -> int:
        return len(self.tickers)

    @property
    def T(self) -> int:
        return len(self.dates)

    def window(self, start: int, stop: int) -> "PricePanel":
        return PricePanel(self.tickers, self.dates[start:stop], self.prices[start:stop])


@dataclass(frozen=True)
class ReturnPanel:
    simple: np.ndarray
    gross: np.ndarray


def load_prices(path) -> PricePanel:
    """Read a ``date,<ticker>,...`` CSV.

    Columns with blank cells are dropped with a warning; zero or negative
    prices are an error.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"price file not found: {path}")
    try:
        df = pd.read_csv(path, index_col=0, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    if df.shape[0] < 3:
        raise DataError(f"{path}: need at least 3 price rows, got {df.shape[0]}")
    blank = df.apply(lambda col: col.str.strip().eq("")).any()
    dropped = list(df.columns[blank])
    if dropped:
        warnings.warn(f"dropping assets with missing prices: {', '.join(dropped)}", stacklevel=2)
        df = df.loc[:, ~blank]
    if df.shape[1] == 0:
        raise DataError(f"{path}: no assets left after dropping incomplete columns")
    try:
        values = df.astype(float).to_numpy()
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric price: {exc}") from exc
    bad = np.any(values <= 0, axis=0)
    if np.any(bad):
        raise DataError(f"{path}: non-positive prices for {', '.join(df.columns[bad])}")
    dates = [str(d).strip() for d in df.index]
    return PricePanel(tickers=[str(c).strip() for c in df.columns], dates=dates, prices=values)


def save_prices(panel: PricePanel, path) -> None:
    df = pd.DataFrame(panel.prices, index=pd.Index(panel.dates, name="date"), columns=panel.tickers)
    df.to_csv(path, float_format="%.10g")


def compute_returns(panel: PricePanel) -> ReturnPanel:
    gross = panel.prices[1:] / panel.prices[:-1]
    return ReturnPanel(simple=gross - 1.0, gross=gross)


def _identity_intensity(X: np.ndarray, S: np.ndarray) -> float:
    # optimal intensity toward the scaled identity, from the centred observations
    t, n = X.shape
    S_b = X.T @ X / t
    target = np.trace(S_b) / n * np.eye(n)
    d2 = np.sum((S_b - target) ** 2)
    if d2 == 0.0:
        return 0.0
    # mean squared Frobenius distance of x x^T from S_b, expanded
    b2 = (np.sum(np.sum(X**2, axis=1) ** 2) - t * np.sum(S_b**2)) / t**2
    return float(min(b2, d2) / d2)


def estimate_model(returns: ReturnPanel, r_f: float = 0.0, shrinkage="none") -> MarketModel:
    """Historical mean returns and a (shrunk) sample covariance.

    ``shrinkage`` is ``"none"``, a fixed intensity in ``[0, 1]`` or ``"auto"``.
    The target is ``tr(S)/n * I``; ``"auto"`` picks the optimal intensity for
    that target.
    """
    R = np.asarray(returns.simple, dtype=float)
    t, n = R.shape
    if t < 2:
        raise DataError(f"need at least 2 return observations, got {t}")
    mu = R.mean(axis=0)
    X = R - mu
    S = X.T @ X / (t - 1)
    if shrinkage in (None, "none"):
        delta = 0.0
    elif shrinkage == "auto":
        delta = _identity_intensity(X, S)
    else:
        delta = float(shrinkage)
        if not 0.0 <= delta <= 1.0:
            raise ValueError(f"shrinkage intensity {delta} outside [0, 1]")
    cov = (1.0 - delta) * S + delta * (np.trace(S) / n) * np.eye(n)
    cov = 0.5 * (cov + cov.T)
    return MarketModel(mu=mu, cov=cov, r_f=r_f)


def synthetic_prices(n: int, T: int, seed: int = 0, start: str = "2000-01-02", freq: str = "W") -> PricePanel:
    """Log-normal price paths driven by a one-factor model with heterogeneous drifts."""
    rng = np.random.default_rng(seed)
    beta = rng.uniform(0.5, 1.5, n)
    drift = rng.normal(0.002, 0.003, n)
    idio = rng.uniform(0.01, 0.04, n)
    market = rng.normal(0.0, 0.02, T - 1)
    shocks = drift + np.outer(market, beta) + rng.normal(size=(T - 1, n)) * idio
    log_p = np.vstack([np.zeros(n), np.cumsum(shocks, axis=0)]) + np.log(rng.uniform(10, 100, n))
    dates = [d.strftime("%Y-%m-%d") for d in pd.date_range(start, periods=T, freq=freq)]
    tickers = [f"A{i:04d}" for i in range(n)]
    return PricePanel(tickers=tickers, dates=dates, prices=np.exp(log_p))


def load_orlib(path, r_f: float = 0.0) -> MarketModel:
    """OR-Library ``port*.txt`` file: ``n``, then ``mean std`` per asset, then ``i j corr`` rows."""
    tokens = Path(path).read_text().split()
    n = int(tokens[0])
    vals = np.array(tokens[1 : 1 + 2 * n], dtype=float).reshape(n, 2)
    mu, sd = vals[:, 0], vals[:, 1]
    rest = np.array(tokens[1 + 2 * n :], dtype=float).reshape(-1, 3)
    corr = np.eye(n)
    i = rest[:, 0].astype(int) - 1
    j = rest[:, 1].astype(int) - 1
    corr[i, j] = rest[:, 2]
    corr[j, i] = rest[:, 2]
    return MarketModel(mu=mu, cov=corr * np.outer(sd, sd), r_f=r_f)
