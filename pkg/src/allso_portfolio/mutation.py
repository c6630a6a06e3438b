"""Mutation of first-level particles: generalised swap or shrinking-window refinement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ConstraintSpec

GATES = ("prose", "literal")


@dataclass(frozen=True)
class MutationConfig:
    k_max_swap: int
    g_max: int
    gate: str = "prose"

    def __post_init__(self):
        if self.k_max_swap < 1:
            raise ValueError("k_max_swap must be >= 1")
        if self.gate not in GATES:
            raise ValueError(f"gate must be one of {GATES}")

    @classmethod
    def for_cardinality(cls, k: int, g_max: int, gate: str = "prose") -> "MutationConfig":
        return cls(k_max_swap=max(1, math.floor(0.05 * k)), g_max=g_max, gate=gate)


def p_swap(g: int) -> float:
    return 1.0 / (1.0 + math.exp(-0.005 * g))


def swap_probability(g: int, gate: str = "prose") -> float:
    """Chance of taking the swap branch at generation ``g``.

    ``"literal"`` uses the logistic as is (rising from 0.5 toward 1);
    ``"prose"`` uses its complement, so swaps fade out and refinement takes
    over as the run progresses.
    """
    p = p_swap(g)
    return 1.0 - p if gate == "prose" else p


def swap_mutation(x, spec: ConstraintSpec, cfg: MutationConfig, rng: np.random.Generator) -> np.ndarray:
    """Move ``k_swap`` in-box holdings onto empty positions, keeping each one's relative place in its box."""
    x = np.asarray(x, dtype=float)
    zeros = np.flatnonzero(x == 0)
    held = np.flatnonzero((x >= spec.l) & (x <= spec.u))
    if zeros.size == 0 or held.size == 0:
        return x.copy()
    k_swap = int(rng.integers(1, cfg.k_max_swap + 1))
    k_swap = min(k_swap, zeros.size, held.size)
    a = rng.choice(zeros, size=k_swap, replace=False)
    b = rng.choice(held, size=k_swap, replace=False)
    out = x.copy()
    l, u = spec.l, spec.u
    out[a] = l[a] + (x[b] - l[b]) / (u[b] - l[b]) * (u[a] - l[a])
    out[b] = 0.0
    return out


def refine_mutation(x, spec: ConstraintSpec, cfg: MutationConfig, g: int, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if g > cfg.g_max:
        raise ValueError(f"generation {g} beyond g_max={cfg.g_max}")
    window = (1.0 - g / (cfg.g_max + 1)) * (spec.u - spec.l)
    idx = np.flatnonzero(x > 0)
    l, u = spec.l[idx], spec.u[idx]
    # clipping both ends keeps a holding that sits outside its box inside it
    lo = np.clip(x[idx] - window[idx], l, u)
    hi = np.clip(x[idx] + window[idx], l, u)
    out = np.zeros_like(x)
    out[idx] = rng.uniform(lo, hi)
    return out


def mutate(x, spec: ConstraintSpec, cfg: MutationConfig, g: int, rng: np.random.Generator) -> np.ndarray:
    if rng.random() <= swap_probability(g, cfg.gate):
        return swap_mutation(x, spec, cfg, rng)
    return refine_mutation(x, spec, cfg, g, rng)
