"""Market, constraint and portfolio types plus the objective evaluations.

Weights are plain ``numpy`` vectors; :class:`Portfolio` is a thin wrapper used
where the support set matters. Every function accepting a portfolio also
accepts a raw weight vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BUDGET_TOL = 1e-9
TURNOVER_TOL = 1e-9
BOX_TOL = 1e-12
SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
NEG_QUAD_TOL = 1e-12


def _as_weights(p) -> np.ndarray:
    if isinstance(p, Portfolio):
        return p.w
    return np.asarray(p, dtype=float)


@dataclass(frozen=True)
class MarketModel:
    """Expected per-period returns ``mu``, their covariance ``cov`` and the risk-free rate."""

    mu: np.ndarray
    cov: np.ndarray
    r_f: float = 0.0

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).ravel()
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mu.size, mu.size):
            raise ValueError(f"cov has shape {cov.shape}, expected {(mu.size, mu.size)}")
        if mu.size == 0:
            raise ValueError("market model needs at least one asset")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
            raise ValueError("cov is not symmetric")
        sym = 0.5 * (cov + cov.T)
        if np.linalg.eigvalsh(sym)[0] < -PSD_TOL:
            raise ValueError("cov is not positive semi-definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov", sym)
        object.__setattr__(self, "r_f", float(self.r_f))

    @property
    def n(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class ConstraintSpec:
    """Cardinality ``k``, box ``[l, u]``, turnover cap ``TR`` around current positions ``x0``."""

    k: int
    l: np.ndarray
    u: np.ndarray
    TR: float = 1.0
    x0: np.ndarray | None = None

    def __post_init__(self):
        l = np.asarray(self.l, dtype=float).ravel()
        u = np.asarray(self.u, dtype=float).ravel()
        n = l.size
        if u.size != n:
            raise ValueError("l and u must have the same length")
        x0 = np.zeros(n) if self.x0 is None else np.asarray(self.x0, dtype=float).ravel()
        if x0.size != n:
            raise ValueError("x0 must have the same length as l and u")
        k = int(self.k)
        if not 1 <= k <= n:
            raise ValueError(f"k={k} must lie in [1, {n}]")
        if np.any(l <= 0) or np.any(l >= u) or np.any(u > 1):
            raise ValueError("bounds must satisfy 0 < l_i < u_i <= 1")
        if not 0.0 <= self.TR <= 1.0:
            raise ValueError("TR must lie in [0, 1]")
        if k * l.min() > 1.0:
            raise ValueError("k * min(l) > 1: no portfolio can satisfy the budget")
        if np.sort(u)[::-1][:k].sum() < 1.0:
            raise ValueError("the k largest upper bounds sum below 1: feasible set is empty")
        if np.any(x0 < 0):
            raise ValueError("x0 must be non-negative")
        s = x0.sum()
        if s != 0.0 and abs(s - 1.0) > BUDGET_TOL:
            raise ValueError(f"x0 must sum to 0 or 1, got {s}")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "TR", float(self.TR))
        object.__setattr__(self, "x0", x0)

    @classmethod
    def uniform(cls, n: int, k: int, l: float, u: float, TR: float = 1.0, x0=None):
        return cls(k=k, l=np.full(n, l), u=np.full(n, u), TR=TR, x0=x0)

    @property
    def n(self) -> int:
        return self.l.size

    @property
    def cold_start(self) -> bool:
        """True for the no-rebalancing case (``x0 = 0``)."""
        return not np.any(self.x0)

    @property
    def uniform_bounds(self) -> bool:
        return bool(np.all(self.l == self.l[0]) and np.all(self.u == self.u[0]))


@dataclass(frozen=True)
class Portfolio:
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        if np.any(w < 0):
            raise ValueError("portfolio weights must be non-negative")
        object.__setattr__(self, "w", w)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.w > 0)


@dataclass
class FeasibilityReport:
    feasible: bool
    budget_gap: float
    cardinality: int
    cardinality_slack: int
    box_violation: float
    turnover: float
    turnover_slack: float
    violated: list[str] = field(default_factory=list)


def portfolio_return(m: MarketModel, p) -> float:
    w = _as_weights(p)
    if w.shape != m.mu.shape:
        raise ValueError(f"weights have shape {w.shape}, expected {m.mu.shape}")
    return float(w @ m.mu)


def portfolio_risk(m: MarketModel, p) -> float:
    w = _as_weights(p)
    if w.shape != m.mu.shape:
        raise ValueError(f"weights have shape {w.shape}, expected {m.mu.shape}")
    q = float(w @ m.cov @ w)
    if q < -NEG_QUAD_TOL:
        raise ValueError(f"negative quadratic form {q}: covariance is not PSD")
    return float(np.sqrt(max(q, 0.0)))


def _msr(excess, sigma):
    # sign(0) is taken as +1, so a zero excess return scores 0 on both branches
    return np.where(excess >= 0, excess / np.where(sigma > 0, sigma, 1.0), excess * sigma)


def modified_sharpe(m: MarketModel, p) -> float:
    """Sharpe ratio for non-negative excess return, excess times volatility otherwise."""
    excess = portfolio_return(m, p) - m.r_f
    sigma = portfolio_risk(m, p)
    if sigma == 0.0 and excess > 0:
        raise ValueError("modified Sharpe ratio undefined: zero risk with positive excess return")
    return float(_msr(excess, sigma))


def objective(m: MarketModel, p) -> float:
    return -modified_sharpe(m, p)


def objective_batch(m: MarketModel, X: np.ndarray) -> np.ndarray:
    """Row-wise ``objective`` for a matrix of portfolios."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    excess = X @ m.mu - m.r_f
    q = np.einsum("ij,ij->i", X @ m.cov, X)
    if np.any(q < -NEG_QUAD_TOL):
        raise ValueError("negative quadratic form: covariance is not PSD")
    sigma = np.sqrt(np.maximum(q, 0.0))
    if np.any((sigma == 0.0) & (excess > 0)):
        raise ValueError("modified Sharpe ratio undefined: zero risk with positive excess return")
    return -_msr(excess, sigma)


def is_feasible(spec: ConstraintSpec, p) -> FeasibilityReport:
    w = _as_weights(p)
    nz = w > 0
    budget_gap = float(w.sum() - 1.0)
    card = int(nz.sum())
    below = np.where(nz, spec.l - w, 0.0)
    above = np.where(nz, w - spec.u, 0.0)
    box_violation = float(max(below.max(initial=0.0), above.max(initial=0.0), 0.0))
    if np.any(w < 0):
        box_violation = max(box_violation, float(-w.min()))
    turnover = float(np.abs(w - spec.x0).sum())
    violated = []
    if abs(budget_gap) > BUDGET_TOL:
        violated.append("budget")
    if card > spec.k:
        violated.append("cardinality")
    if box_violation > BOX_TOL:
        violated.append("box")
    if turnover > spec.TR + TURNOVER_TOL:
        violated.append("turnover")
    return FeasibilityReport(
        feasible=not violated,
        budget_gap=budget_gap,
        cardinality=card,
        cardinality_slack=spec.k - card,
        box_violation=box_violation,
        turnover=turnover,
        turnover_slack=spec.TR - turnover,
        violated=violated,
    )


def feasible_mask(spec: ConstraintSpec, X: np.ndarray) -> np.ndarray:
    """Vectorised ``is_feasible(...).feasible`` over the rows of ``X``."""
    X = np.atleast_2d(X)
    nz = X > 0
    ok = np.abs(X.sum(axis=1) - 1.0) <= BUDGET_TOL
    ok &= nz.sum(axis=1) <= spec.k
    ok &= ~np.any(nz & ((X < spec.l - BOX_TOL) | (X > spec.u + BOX_TOL)), axis=1)
    ok &= ~np.any(X < 0, axis=1)
    ok &= np.abs(X - spec.x0).sum(axis=1) <= spec.TR + TURNOVER_TOL
    return ok


def resolve_cardinality(k, n: int) -> int:
    """Asset count from ``k``; values below 1 are a fraction of ``n`` (rounded up)."""
    if k <= 0:
        raise ValueError(f"cardinality must be positive, got {k}")
    return min(n, max(1, math.ceil(k * n - 1e-9))) if k < 1 else int(k)
