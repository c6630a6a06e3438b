"""Constraint handling: turnover violation, the self-adaptive hybrid penalty
and the exact l1 penalty with its multiplicative weight schedules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import BOX_TOL, BUDGET_TOL, TURNOVER_TOL, ConstraintSpec

EPS0_RANGE = (1e-15, 1.0)
EPSI_RANGE = (1e-4, 1e4)
EPS_INIT = (1e-4, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
EPS0_EVERY = 5
EPSI_EVERY = 10


def turnover_violation(x, spec: ConstraintSpec):
    """``sum |x - x0| - TR``; row-wise when ``x`` is a matrix."""
    x = np.asarray(x, dtype=float)
    return np.abs(x - spec.x0).sum(axis=-1) - spec.TR


@dataclass
class HybridPenaltyState:
    """Best turnover-feasible reference point seen so far plus last-call bounds."""

    f_min: float = np.nan
    f_max: float = np.nan
    psi_max: float = 0.0
    R_f: float = 0.0
    z_f: float | None = None
    z_x: np.ndarray | None = None

    @property
    def bootstrap(self) -> bool:
        return self.z_f is None


def hybrid_penalize(f, psi, state: HybridPenaltyState | None = None, X=None):
    """Self-adaptive penalty over one set of projected candidates.

    ``f`` are raw objective values, ``psi`` turnover violations. The
    reference point persists in ``state`` across calls; the normalisation
    bounds, ``psi_max`` and the feasibility ratio are recomputed per call.
    Returns ``(F, state)``.
    """
    f = np.asarray(f, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if f.size == 0:
        raise ValueError("cannot penalise an empty generation")
    if state is None:
        state = HybridPenaltyState()
    feasible = psi <= 0
    f_min, f_max = float(f.min()), float(f.max())
    span = f_max - f_min
    if np.any(feasible):
        i = int(np.flatnonzero(feasible)[np.argmin(f[feasible])])
        if state.z_f is None or f[i] < state.z_f:
            state.z_f = float(f[i])
            state.z_x = None if X is None else np.array(X[i], dtype=float)
    f_hat = (f - f_min) / span if span > 0 else np.zeros_like(f)
    if state.z_f is None:
        z_f, z_hat = f_max, 1.0
    else:
        z_f = state.z_f
        z_hat = float(np.clip((z_f - f_min) / span, 0.0, 1.0)) if span > 0 else 0.0
    viol = np.maximum(psi, 0.0)
    psi_max = float(viol.max())
    Psi = viol / psi_max if psi_max > 0 else np.zeros_like(viol)
    R_f = float(feasible.mean())
    F = np.where(
        feasible,
        f_hat,
        np.where(f <= z_f, z_hat + R_f * Psi, f_hat + R_f * Psi),
    )
    state.f_min, state.f_max, state.psi_max, state.R_f = f_min, f_max, psi_max, R_f
    return F, state


def pair_prefers(f_new, psi_new, f_old, psi_old) -> bool:
    """Whether a candidate beats the incumbent under the penalty on the pair alone.

    With a fresh reference point the two-element penalty ranks any
    turnover-feasible point above an infeasible one and otherwise compares
    objective values; when both are infeasible it ties, and the smaller
    violation wins.
    """
    new_ok, old_ok = psi_new <= 0, psi_old <= 0
    if new_ok != old_ok:
        return bool(new_ok)
    if new_ok:
        return f_new < f_old
    if psi_new != psi_old:
        return psi_new < psi_old
    return f_new < f_old


def l1_violations(x, delta, spec: ConstraintSpec) -> np.ndarray:
    """The six violation measures ``CV1..CV6``; rows of a matrix give rows of the result.

    A measure inside the tolerance used by :func:`~allso_portfolio.model.is_feasible`
    is reported as exactly zero, so rounding noise on an accepted portfolio never
    reaches the penalty.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(delta, dtype=float)
    lo = np.maximum(d * spec.l - x, 0.0)
    hi = np.maximum(x - d * spec.u, 0.0)
    budget = np.abs(x.sum(axis=-1) - 1.0)
    turnover = np.maximum(np.abs(x - spec.x0).sum(axis=-1) - spec.TR, 0.0)
    cv = np.stack(
        [
            np.where(budget <= BUDGET_TOL, 0.0, budget),
            np.maximum(d.sum(axis=-1) - spec.k, 0.0),
            np.where(lo <= BOX_TOL, 0.0, lo).sum(axis=-1),
            np.where(hi <= BOX_TOL, 0.0, hi).sum(axis=-1),
            np.abs(d * (1.0 - d)).sum(axis=-1),
            np.where(turnover <= TURNOVER_TOL, 0.0, turnover),
        ],
        axis=-1,
    )
    return cv


def l1_penalty(f, cv, eps):
    eps = np.asarray(eps, dtype=float)
    return np.asarray(f) + (np.asarray(cv) @ eps[1:]) / eps[0]


def update_eps0(eps0: float, f_curr: float, f_prev: float, mode: str = "sign-aware") -> float:
    """Loosen after a non-improving step, tighten after a >=10% improvement.

    ``"literal"`` uses ``f_curr < 0.9 * f_prev``. ``"sign-aware"`` measures the
    10% against ``|f_prev|`` so it keeps its meaning for negative objectives;
    both coincide when ``f_prev > 0``.
    """
    lo, hi = EPS0_RANGE
    if f_curr >= f_prev:
        return min(3.0 * eps0, hi)
    if mode == "literal":
        big_drop = f_curr < 0.9 * f_prev
    elif mode == "sign-aware":
        big_drop = f_curr < f_prev - 0.1 * abs(f_prev)
    else:
        raise ValueError(f"unknown eps0 mode {mode!r}")
    if big_drop:
        return max(0.6 * eps0, lo)
    return eps0


def update_eps_i(eps_i: float, cv_curr: float, cv_prev: float) -> float:
    lo, hi = EPSI_RANGE
    if cv_curr > 0.95 * cv_prev:
        return min(2.0 * eps_i, hi)
    if cv_curr < 0.9 * cv_prev:
        return max(0.5 * eps_i, lo)
    return eps_i


@dataclass
class L1PenaltyState:
    eps: np.ndarray = field(default_factory=lambda: np.array(EPS_INIT))
    cv_prev: np.ndarray | None = None
    f_prev: float | None = None
    mode: str = "sign-aware"

    def step(self, g: int, f_curr: float, cv_curr) -> None:
        """Record generation ``g``'s best ``f`` and violations, updating weights on schedule."""
        cv_curr = np.asarray(cv_curr, dtype=float)
        if g >= 1 and self.f_prev is not None:
            if g % EPS0_EVERY == 0:
                self.eps[0] = update_eps0(self.eps[0], f_curr, self.f_prev, self.mode)
            if g % EPSI_EVERY == 0:
                for i in range(6):
                    self.eps[i + 1] = update_eps_i(self.eps[i + 1], cv_curr[i], self.cv_prev[i])
        self.f_prev = float(f_curr)
        self.cv_prev = cv_curr.copy()


def split_refine(x, spec: ConstraintSpec):
    """Inclusion mask from in-box components, then renormalise the kept weights.

    Returns ``(delta, x_new, degenerate)``; when no component is in its box
    the weights are returned unchanged and ``delta`` marks the largest one.
    """
    x = np.asarray(x, dtype=float)
    delta, x_new, degenerate = split_refine_batch(x[None, :], spec)
    return delta[0], x_new[0], bool(degenerate[0])


def split_refine_batch(X, spec: ConstraintSpec):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    delta = ((X >= spec.l) & (X <= spec.u)).astype(float)
    kept = X * delta
    denom = kept.sum(axis=1)
    degenerate = denom <= 0
    out = np.where(degenerate[:, None], X, kept / np.where(degenerate, 1.0, denom)[:, None])
    if np.any(degenerate):
        rows = np.flatnonzero(degenerate)
        delta[rows] = 0.0
        delta[rows, np.argmax(X[rows], axis=1)] = 1.0
    return delta, out, degenerate
