"""Projection onto budget + box + cardinality sets.

The projection of ``y`` keeps a support drawn from the ``k`` largest
components of ``y`` and then solves a box-constrained simplex problem on
that support: ``x_i = clip(y_i - eta, l_i, u_i)`` with ``eta`` chosen so the
weights sum to one.

Two support rules are available. ``"literal"`` keeps the positive members of
the top-k set (extended or trimmed only when that set cannot carry a unit
budget). ``"exact"`` (default) scans every feasible prefix of the top-k set,
sorted by decreasing ``y``, and keeps the closest point; with identical
bounds on every asset this is the exact Euclidean projection, because among
supports of equal size the one holding the largest ``y`` values is always
closer.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .model import ConstraintSpec, Portfolio

ETA_TOL = 1e-10
ETA_MAX_ITER = 200
_MASS_TOL = 1e-12


class InfeasibleSupportError(ValueError):
    pass


@njit(cache=True)
def _box_sum(y, l, u, eta):
    s = 0.0
    for i in range(y.size):
        v = y[i] - eta
        if v < l[i]:
            v = l[i]
        elif v > u[i]:
            v = u[i]
        s += v
    return s


@njit(cache=True)
def _eta_kernel(y, l, u, max_iter):
    lo = np.min(y - u)
    hi = np.max(y - l)
    eta = 0.5 * (lo + hi)
    for _ in range(max_iter):
        eta = 0.5 * (lo + hi)
        g = _box_sum(y, l, u, eta)
        if abs(g - 1.0) <= 1e-13 or hi - lo <= 1e-16:
            break
        if g > 1.0:
            lo = eta
        else:
            hi = eta
    # polish: solve the linear piece the bisection landed on
    free = 0
    s_free = 0.0
    s_fixed = 0.0
    for i in range(y.size):
        v = y[i] - eta
        if v <= l[i]:
            s_fixed += l[i]
        elif v >= u[i]:
            s_fixed += u[i]
        else:
            free += 1
            s_free += y[i]
    if free > 0:
        cand = (s_free - (1.0 - s_fixed)) / free
        if abs(_box_sum(y, l, u, cand) - 1.0) < abs(_box_sum(y, l, u, eta) - 1.0):
            eta = cand
    return eta


@njit(cache=True)
def _best_prefix(ys, ls, us, lengths):
    best_cost = np.inf
    best_m = -1
    best_x = np.zeros(ys.size)
    for m in lengths:
        yy = ys[:m]
        eta = _eta_kernel(yy, ls[:m], us[:m], 200)
        x = np.minimum(np.maximum(yy - eta, ls[:m]), us[:m])
        # ||x - y||^2 up to the constant ||y||^2
        cost = np.sum(x * x - 2.0 * x * yy)
        if cost < best_cost:
            best_cost = cost
            best_m = m
            best_x[:] = 0.0
            best_x[:m] = x
    return best_m, best_x


@njit(cache=True)
def _feasible_lengths(ls, us):
    cu = np.cumsum(us)
    cl = np.cumsum(ls)
    out = []
    for j in range(ls.size):
        if cu[j] >= 1.0 - 1e-12 and cl[j] <= 1.0 + 1e-12:
            out.append(j + 1)
    return np.array(out, dtype=np.int64)


@njit(cache=True)
def _project_rows(Y, l, u, k, exact):
    P, n = Y.shape
    X = np.zeros((P, n))
    fallback = np.zeros(P, dtype=np.bool_)
    failed = np.zeros(P, dtype=np.bool_)
    for p in range(P):
        y = Y[p]
        order = np.argsort(-y, kind="mergesort")[:k]
        ys = y[order]
        ls = l[order]
        us = u[order]
        lengths = _feasible_lengths(ls, us)
        m_pos = 0
        for i in range(k):
            if ys[i] > 0:
                m_pos += 1
        lit_ok = False
        for m in lengths:
            if m == m_pos:
                lit_ok = True
        fallback[p] = not lit_ok
        if lengths.size == 0:
            # top-k by y cannot carry the budget: rank the top-k by capacity instead
            order = order[np.argsort(-us, kind="mergesort")]
            ys = y[order]
            ls = l[order]
            us = u[order]
            lengths = _feasible_lengths(ls, us)
            if lengths.size == 0:
                failed[p] = True
                continue
        if exact:
            cands = lengths
        elif lit_ok:
            cands = np.array([m_pos], dtype=np.int64)
        elif m_pos < lengths[0]:
            cands = lengths[:1]
        else:
            cands = lengths[-1:]
        best_m, best_x = _best_prefix(ys, ls, us, cands)
        for j in range(best_m):
            X[p, order[j]] = best_x[j]
    return X, fallback, failed


def top_k_support(y, k: int) -> np.ndarray:
    """Indices of the ``k`` largest entries, ties broken toward lower indices."""
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if n < 2:
        raise ValueError("top_k_support needs n >= 2")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    return np.sort(np.argsort(-y, kind="stable")[:k])


def project_box(y, l, u) -> np.ndarray:
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(l > u):
        raise ValueError("box bounds must satisfy l <= u")
    return np.minimum(np.maximum(np.asarray(y, dtype=float), l), u)


def solve_eta(y_sub, l_sub, u_sub) -> float:
    """Shift ``eta`` with ``sum(clip(y - eta, l, u)) == 1`` (bisection, then an exact polish)."""
    y = np.ascontiguousarray(y_sub, dtype=float).ravel()
    l = np.ascontiguousarray(l_sub, dtype=float).ravel()
    u = np.ascontiguousarray(u_sub, dtype=float).ravel()
    if not (y.size == l.size == u.size) or y.size == 0:
        raise ValueError("y, l, u must be non-empty and of equal length")
    if l.sum() > 1.0 + _MASS_TOL or u.sum() < 1.0 - _MASS_TOL:
        raise InfeasibleSupportError("B infeasible for this support")
    return float(_eta_kernel(y, l, u, ETA_MAX_ITER))


def reconstruct_delta(p) -> np.ndarray:
    """Binary inclusion vector of a portfolio."""
    w = p.w if isinstance(p, Portfolio) else np.asarray(p, dtype=float)
    return (w > 0).astype(int)


class FeasibleSetB:
    """Budget, box and cardinality constraints of a spec (turnover ignored)."""

    def __init__(self, spec: ConstraintSpec, method: str = "exact"):
        if method not in ("exact", "literal"):
            raise ValueError(f"unknown projection method {method!r}")
        self.spec = spec
        self.method = method
        self.l = np.ascontiguousarray(spec.l)
        self.u = np.ascontiguousarray(spec.u)
        self.k = spec.k
        if not self._has_certificate():
            raise InfeasibleSupportError("no support of size <= k can carry a unit budget inside the box")

    def _has_certificate(self) -> bool:
        for key in (-self.u, self.l, self.l - self.u):
            order = np.argsort(key, kind="stable")[: self.k]
            cu = np.cumsum(self.u[order])
            cl = np.cumsum(self.l[order])
            if np.any((cu >= 1.0 - _MASS_TOL) & (cl <= 1.0 + _MASS_TOL)):
                return True
        return False

    def project_batch(self, Y) -> tuple[np.ndarray, np.ndarray]:
        """Project each row; also return the rows where the positive top-k set was unusable."""
        Y = np.ascontiguousarray(np.atleast_2d(Y), dtype=float)
        X, fallback, failed = _project_rows(Y, self.l, self.u, self.k, self.method == "exact")
        if np.any(failed):
            raise InfeasibleSupportError("no feasible support among the top-k components")
        return X, fallback

    def project(self, y) -> np.ndarray:
        X, _ = self.project_batch(np.asarray(y, dtype=float)[None, :])
        return X[0]


def project_onto_B(B: FeasibleSetB, y) -> np.ndarray:
    return B.project(y)
