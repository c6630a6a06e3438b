"""Level-based learning swarm optimiser with adaptive level count, plus the
dynamic-level variant and a global-best PSO baseline used for comparisons."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import ConstraintSpec, MarketModel, feasible_mask, is_feasible, objective_batch
from .mutation import MutationConfig, mutate
from .penalty import (
    HybridPenaltyState,
    L1PenaltyState,
    hybrid_penalize,
    l1_penalty,
    l1_violations,
    pair_prefers,
    split_refine_batch,
    turnover_violation,
)
from .projection import FeasibleSetB, solve_eta

DLLSO_POOL = (4, 6, 8, 10, 20, 50)
DLLSO_PHI = 0.4
ALGORITHMS = ("allso", "dllso", "pso")
HANDLERS = ("hybrid", "l1")
TRACE_HEADER = ("gen", "gbest_F", "gbest_f", "mean_F", "diversity", "NL", "phi", "feasible_count")


@dataclass(frozen=True)
class SwarmConfig:
    NP: int = 500
    NL_min: int = 2
    NL_max: int = 50
    NL_init: int = 20
    delta_bar: float = 0.01
    px: float = 0.01
    xi: float = 1e-6
    g_max: int = 2000
    seed: int = 0
    d_min: float = 0.0005
    d_max: float = 0.0050
    # velocity bound as a multiple of the upper weight bound
    v_max_scale: float = 1.0
    phi_fixed: float = DLLSO_PHI
    level_pool: tuple[int, ...] = DLLSO_POOL
    fitness_denominator: str = "abs"
    swap_gate: str = "prose"
    projection: str = "exact"
    eps0_mode: str = "sign-aware"
    # global-best PSO baseline
    w_min: float = 0.4
    w_max: float = 0.9
    c_min: float = 0.5
    c_max: float = 2.5

    def __post_init__(self):
        if not 2 <= self.NL_min <= self.NL_max <= self.NP:
            raise ValueError(f"need 2 <= NL_min <= NL_max <= NP, got {self.NL_min}, {self.NL_max}, {self.NP}")
        if self.delta_bar <= 0 or self.xi <= 0:
            raise ValueError("delta_bar and xi must be positive")
        if not 0.0 <= self.px <= 1.0:
            raise ValueError("px must lie in [0, 1]")
        if self.g_max < 0:
            raise ValueError("g_max must be >= 0")
        if not 0.0 <= self.d_min < self.d_max:
            raise ValueError("need 0 <= d_min < d_max")
        if self.fitness_denominator not in ("abs", "literal"):
            raise ValueError("fitness_denominator must be 'abs' or 'literal'")
        if not any(2 <= s <= self.NP for s in self.level_pool):
            raise ValueError("level_pool has no usable level count for this NP")
        if not 0.0 <= self.phi_fixed <= 1.0:
            raise ValueError("phi_fixed must lie in [0, 1]")


@dataclass
class TraceRow:
    gen: int
    gbest_F: float
    gbest_f: float
    mean_F: float
    diversity: float
    NL: int
    phi: float
    feasible_count: int

    def as_tuple(self):
        return (self.gen, self.gbest_F, self.gbest_f, self.mean_F, self.diversity, self.NL, self.phi, self.feasible_count)


@dataclass
class SwarmState:
    X: np.ndarray
    V: np.ndarray
    f: np.ndarray
    psi: np.ndarray
    F: np.ndarray
    cv: np.ndarray | None = None
    NL: int = 20
    phi: float = 0.45
    g: int = 0
    t_prev: float = 0.0
    gbest_x: np.ndarray | None = None
    gbest_f: float = np.inf
    gbest_psi: float = np.inf
    gbest_cv: np.ndarray | None = None

    def permute(self, order):
        for name in ("X", "V", "f", "psi", "F", "cv"):
            arr = getattr(self, name)
            if arr is not None:
                setattr(self, name, arr[order])


@dataclass
class RunResult:
    best_x: np.ndarray
    best_f: float
    best_F: float
    feasible: bool
    trace: list[TraceRow] = field(default_factory=list)
    label: str = ""

    @property
    def msr(self) -> float:
        return -self.best_f

    def trace_csv(self) -> str:
        return trace_to_csv(self.trace)


def trace_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in rows:
        w.writerow([r.gen, repr(float(r.gbest_F)), repr(float(r.gbest_f)), repr(float(r.mean_F)),
                    repr(float(r.diversity)), r.NL, repr(float(r.phi)), r.feasible_count])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# adaptive-parameter rules


def level_sizes(NP: int, NL: int) -> list[int]:
    """Equal levels of ``NP // NL`` with the remainder added to the last one."""
    if not 1 <= NL <= NP:
        raise ValueError(f"NL={NL} outside [1, {NP}]")
    sizes = [NP // NL] * NL
    sizes[-1] += NP % NL
    return sizes


def partition_levels(F, NL: int) -> np.ndarray:
    """Level index (0 = best) of every particle, ranking by ascending ``F``."""
    F = np.asarray(F)
    order = np.argsort(F, kind="stable")
    levels = np.repeat(np.arange(NL), level_sizes(F.size, NL))
    out = np.empty(F.size, dtype=int)
    out[order] = levels
    return out


def clamp_velocity(v, v_max):
    v_max = np.asarray(v_max, dtype=float)
    return np.minimum(np.maximum(v, -v_max), v_max)


def _denominator(f_gbest: float, xi: float, mode: str) -> float:
    return (abs(f_gbest) if mode == "abs" else f_gbest) + xi


def aggregation_indicator(mean_f: float, f_gbest: float, xi: float = 1e-6, mode: str = "abs") -> float:
    return (mean_f - f_gbest) / _denominator(f_gbest, xi, mode)


def relative_improvement(f_prev: float, f_curr: float, xi: float = 1e-6, mode: str = "abs") -> float:
    return (f_prev - f_curr) / _denominator(f_curr, xi, mode)


def update_phi(s: float) -> float:
    return 0.35 + 0.1 / (1.0 + 10.0 * s)


def resolve_level_count(NL: int, cfg: SwarmConfig, rng) -> int:
    """Bring an out-of-range level count back: random reset with probability ``px``, else clamp."""
    if cfg.NL_min <= NL <= cfg.NL_max:
        return NL
    if rng.random() < cfg.px:
        return int(rng.integers(cfg.NL_min, cfg.NL_max + 1))
    return cfg.NL_max if NL > cfg.NL_max else cfg.NL_min


def update_num_levels(NL: int, s: float, cfg: SwarmConfig, rng) -> int:
    raw = 2 * NL if s < cfg.delta_bar else NL // 2
    return resolve_level_count(raw, cfg, rng)


def update_particle(x, v, e1, e2, phi, r, v_max):
    """Velocity and position step toward two exemplars; ``r`` holds ``(r1, r2, r3)``."""
    r1, r2, r3 = r
    v_new = r1 * v + r2 * (e1 - x) + phi * r3 * (e2 - x)
    v_new = clamp_velocity(v_new, v_max)
    return v_new, x + v_new


def diversity(X) -> float:
    return float(np.linalg.norm(X - X.mean(axis=0), axis=1).mean())


# ---------------------------------------------------------------------------
# initialisation


def _bounded_sum(lo, hi, total, rng):
    # random vector in [lo, hi] summing to total; caller guarantees sum(lo) <= total <= sum(hi)
    x = lo.copy()
    rem = total - x.sum()
    for _ in range(50):
        slack = hi - x
        if rem <= 1e-15 or slack.sum() <= 0:
            break
        share = rng.random(x.size) * (slack > 0)
        if share.sum() == 0:
            break
        add = np.minimum(share / share.sum() * rem, slack)
        x += add
        rem -= add.sum()
    for i in range(x.size):
        if rem <= 0:
            break
        add = min(hi[i] - x[i], rem)
        x[i] += add
        rem -= add
    return x


def _trade_sets(seed, spec, d_min, d_max):
    l, u = spec.l, spec.u
    held = np.flatnonzero(seed > 0)
    sell_cap = np.minimum(d_max, seed[held] - l[held])
    can_sell = sell_cap >= max(d_min, 1e-15)
    can_buy = np.minimum(d_max, u[held] - seed[held]) >= d_min
    zeros = np.flatnonzero(seed == 0)
    zeros = zeros[np.maximum(d_min, l[zeros]) <= np.minimum(d_max, u[zeros])]
    n_new_max = min(max(spec.k - held.size, 0), zeros.size)
    return held, sell_cap, can_sell, can_buy, zeros, n_new_max


def _count_bounds(D, sets, d_min, d_max):
    # fewest trades that can move D at d_max each, most sellers that still leave that many buyers
    _, _, can_sell, can_buy, _, n_new_max = sets
    k_min = max(1, math.ceil(D / d_max - 1e-12))
    k1_max = int(can_sell.sum())
    if d_min > 0:
        k1_max = min(k1_max, math.floor(D / d_min + 1e-12))
    if n_new_max < k_min:
        k1_max = min(k1_max, n_new_max + int(can_buy.sum()) - k_min)
    return k_min, k1_max


def _try_reallocate(seed, spec, D, rng, d_min, d_max, sets):
    l, u = spec.l, spec.u
    held, sell_cap, can_sell, can_buy, zeros, n_new_max = sets
    eligible = held[can_sell]
    k_min, k1_max = _count_bounds(D, sets, d_min, d_max)
    if k1_max < k_min:
        return None
    k1 = int(rng.integers(k_min, k1_max + 1))
    pick = rng.choice(eligible.size, size=k1, replace=False)
    sellers = eligible[pick]
    s_hi = sell_cap[can_sell][pick]
    s_lo = np.full(k1, d_min)
    if s_hi.sum() < D or s_lo.sum() > D:
        return None

    k2 = int(rng.integers(k_min, k1 + 1))
    n_new = min(k2, n_new_max)
    new = rng.choice(zeros, size=n_new, replace=False) if n_new else np.empty(0, dtype=int)
    # beyond the cardinality room, top up holdings that are not being sold
    others = np.setdiff1d(held[can_buy], sellers)
    n_old = min(k2 - n_new, others.size)
    old = rng.choice(others, size=n_old, replace=False) if n_old else np.empty(0, dtype=int)
    buyers = np.concatenate([new, old]).astype(int)
    if buyers.size == 0:
        return None
    b_lo = np.concatenate([np.maximum(d_min, l[new]), np.full(n_old, d_min)])
    b_hi = np.concatenate([np.minimum(d_max, u[new]), np.minimum(d_max, u[old] - seed[old])])
    if b_lo.sum() > D or b_hi.sum() < D:
        return None
    x = seed.copy()
    x[sellers] -= _bounded_sum(s_lo, s_hi, D, rng)
    x[buyers] += _bounded_sum(b_lo, b_hi, D, rng)
    return x


def reallocate(seed, spec: ConstraintSpec, D: float, rng, d_min=0.0005, d_max=0.005, attempts=100):
    """Move total weight ``D`` from some holdings to other assets (halving ``D`` on repeated failure)."""
    sets = _trade_sets(seed, spec, d_min, d_max)
    _, _, can_sell, can_buy, _, n_new_max = sets
    # a trade needs one seller and a different buyer
    tradable = can_sell.any() and (
        n_new_max > 0 or can_buy.sum() >= 2 or (can_buy.sum() == 1 and (can_sell & ~can_buy).any())
    )
    if not tradable:
        return seed.copy()
    while D > 0 and D >= d_min:
        k_min, k1_max = _count_bounds(D, sets, d_min, d_max)
        if k1_max < k_min:
            D *= 0.5
            continue
        for _ in range(attempts):
            x = _try_reallocate(seed, spec, D, rng, d_min, d_max, sets)
            if x is not None:
                return x
        D *= 0.5
    return seed.copy()


def random_feasible_portfolio(spec: ConstraintSpec, rng) -> np.ndarray:
    """Random support of size ``k`` with uniform box draws shifted onto the budget."""
    n, k = spec.n, spec.k
    for _ in range(100):
        support = np.sort(rng.choice(n, size=k, replace=False))
        l, u = spec.l[support], spec.u[support]
        if l.sum() <= 1.0 <= u.sum():
            y = rng.uniform(l, u)
            eta = solve_eta(y, l, u)
            x = np.zeros(n)
            x[support] = np.clip(y - eta, l, u)
            return x
    return FeasibleSetB(spec).project(rng.random(n))


def initialize_positions(spec: ConstraintSpec, NP: int, rng, d_min=0.0005, d_max=0.005) -> np.ndarray:
    """Start positions near the current portfolio (random feasible portfolios on a cold start)."""
    if spec.cold_start:
        return np.array([random_feasible_portfolio(spec, rng) for _ in range(NP)])
    x0 = spec.x0
    rep = is_feasible(replace(spec, TR=1.0), x0)
    seed = x0 if rep.feasible else FeasibleSetB(spec).project(x0)
    budget = max(0.0, spec.TR - np.abs(seed - x0).sum())
    X = np.empty((NP, spec.n))
    for p in range(NP):
        D = rng.uniform(0.0, budget / 2.0)
        X[p] = reallocate(seed, spec, D, rng, d_min, d_max) if D > 0 else seed
    return X


def initialize_swarm(spec: ConstraintSpec, cfg: SwarmConfig, rng=None) -> SwarmState:
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    X = initialize_positions(spec, cfg.NP, rng, cfg.d_min, cfg.d_max)
    n = spec.n
    return SwarmState(X=X, V=np.zeros((cfg.NP, n)), f=np.zeros(cfg.NP), psi=np.zeros(cfg.NP), F=np.zeros(cfg.NP))


# ---------------------------------------------------------------------------
# fitness evaluation


@dataclass
class _Batch:
    X: np.ndarray
    f: np.ndarray
    psi: np.ndarray
    cv: np.ndarray | None


class _Fitness:
    """Repair/evaluate/penalise for one handler."""

    def __init__(self, model: MarketModel, spec: ConstraintSpec, handler: str, cfg: SwarmConfig):
        if handler not in HANDLERS:
            raise ValueError(f"handler must be one of {HANDLERS}")
        if model.n != spec.n:
            raise ValueError("market model and constraint spec disagree on n")
        self.model, self.spec, self.handler = model, spec, handler
        self.B = FeasibleSetB(spec, cfg.projection)
        self.hybrid = HybridPenaltyState()
        self.l1 = L1PenaltyState(mode=cfg.eps0_mode)

    def evaluate(self, Y) -> _Batch:
        if self.handler == "hybrid":
            X, _ = self.B.project_batch(Y)
            cv = None
        else:
            delta, X, _ = split_refine_batch(Y, self.spec)
            cv = l1_violations(X, delta, self.spec)
        return _Batch(X, objective_batch(self.model, X), turnover_violation(X, self.spec), cv)

    def penalize(self, f, psi, cv, X=None):
        if self.handler == "hybrid":
            F, _ = hybrid_penalize(f, psi, self.hybrid, X)
            return F
        return l1_penalty(f, cv, self.l1.eps)

    def gbest_F(self, st: SwarmState) -> float:
        if self.handler == "hybrid":
            # pairwise ranking is feasibility first, then f
            return st.gbest_f if st.gbest_psi <= 0 else math.inf
        return float(l1_penalty(st.gbest_f, st.gbest_cv, self.l1.eps))

    def candidate_wins(self, st: SwarmState, f, psi, cv) -> bool:
        if self.handler == "hybrid":
            return pair_prefers(f, psi, st.gbest_f, st.gbest_psi)
        eps = self.l1.eps
        return float(l1_penalty(f, cv, eps)) < float(l1_penalty(st.gbest_f, st.gbest_cv, eps))


def _take(st: SwarmState, idx, batch: _Batch, rows):
    st.X[idx] = batch.X[rows]
    st.f[idx] = batch.f[rows]
    st.psi[idx] = batch.psi[rows]
    if st.cv is not None:
        st.cv[idx] = batch.cv[rows]


def _set_gbest(st: SwarmState, i: int):
    st.gbest_x = st.X[i].copy()
    st.gbest_f = float(st.f[i])
    st.gbest_psi = float(st.psi[i])
    st.gbest_cv = None if st.cv is None else st.cv[i].copy()


def _exemplars(sizes, rng):
    """Indices of two exemplars for each particle outside the first level."""
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    levels = np.repeat(np.arange(len(sizes)), sizes)[sizes[0]:]
    m = levels.size
    u = rng.random((m, 4))
    # two distinct higher levels for level >= 2 (0-based), both from level 0 for level 1
    L = np.maximum(levels, 2)
    a = np.floor(u[:, 0] * L).astype(int)
    b = np.floor(u[:, 1] * (L - 1)).astype(int)
    b = b + (b >= a)
    l1, l2 = np.minimum(a, b), np.maximum(a, b)
    sz = np.asarray(sizes)
    p1 = starts[l1] + np.floor(u[:, 2] * sz[l1]).astype(int)
    p2 = starts[l2] + np.floor(u[:, 3] * sz[l2]).astype(int)
    lp = sizes[0]
    top = levels == 1
    if np.any(top):
        i = np.floor(u[top, 0] * lp).astype(int)
        j = np.floor(u[top, 1] * max(lp - 1, 1)).astype(int)
        j = np.where(lp > 1, j + (j >= i), i)
        p1[top], p2[top] = np.minimum(i, j), np.maximum(i, j)
    return p1, p2


def mutate_level_one(st: SwarmState, fit: _Fitness, lp: int, M) -> np.ndarray:
    """Replace first-level particles by their mutants where the mutant scores lower; re-sort the level.

    Both sets are penalised together. Returns the replacement mask in the
    level's order before re-sorting.
    """
    mb = fit.evaluate(M)
    cv = None if st.cv is None else np.vstack([st.cv[:lp], mb.cv])
    F = fit.penalize(np.concatenate([st.f[:lp], mb.f]), np.concatenate([st.psi[:lp], mb.psi]), cv,
                     np.vstack([st.X[:lp], mb.X]))
    better = F[lp:] < F[:lp]
    idx = np.flatnonzero(better)
    _take(st, idx, mb, idx)
    st.F[:lp] = np.where(better, F[lp:], F[:lp])
    head = np.argsort(st.F[:lp], kind="stable")
    st.permute(np.concatenate([head, np.arange(lp, st.F.size)]))
    return better


def _row(fit: _Fitness, st: SwarmState) -> TraceRow:
    return TraceRow(
        gen=st.g,
        gbest_F=fit.gbest_F(st),
        gbest_f=st.gbest_f,
        mean_F=float(st.F.mean()),
        diversity=diversity(st.X),
        NL=st.NL,
        phi=st.phi,
        feasible_count=int(feasible_mask(fit.spec, st.X).sum()),
    )


def _label(algorithm, handler, mutation):
    return f"{algorithm}{'-mut' if mutation and algorithm != 'pso' else ''}-{'h' if handler == 'hybrid' else 'l1'}"


def run(
    model: MarketModel,
    spec: ConstraintSpec,
    cfg: SwarmConfig,
    handler: str = "hybrid",
    mutation: bool = True,
    algorithm: str = "allso",
    initial=None,
    observer=None,
) -> RunResult:
    """Optimise the modified Sharpe ratio under ``spec`` for exactly ``cfg.g_max`` generations.

    ``initial`` optionally fixes the starting positions (shared populations in
    comparisons). ``observer(state)`` is called after every generation.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"algorithm must be one of {ALGORITHMS}")
    if algorithm == "pso":
        return run_pso(model, spec, cfg, handler=handler, initial=initial, observer=observer)
    rng = np.random.default_rng(cfg.seed)
    fit = _Fitness(model, spec, handler, cfg)
    X0 = initialize_positions(spec, cfg.NP, rng, cfg.d_min, cfg.d_max) if initial is None else np.array(initial, dtype=float)
    if X0.shape != (cfg.NP, spec.n):
        raise ValueError(f"initial population has shape {X0.shape}, expected {(cfg.NP, spec.n)}")
    b = fit.evaluate(X0)
    st = SwarmState(X=b.X, V=np.zeros_like(b.X), f=b.f, psi=b.psi, F=fit.penalize(b.f, b.psi, b.cv, b.X), cv=b.cv)
    st.permute(np.argsort(st.F, kind="stable"))
    _set_gbest(st, 0)
    pool = [s for s in cfg.level_pool if s <= cfg.NP]
    if algorithm == "dllso":
        st.NL, st.phi = int(rng.choice(pool)), cfg.phi_fixed
    else:
        st.NL = min(max(cfg.NL_init, cfg.NL_min), cfg.NL_max)
        st.phi = update_phi(aggregation_indicator(st.f.mean(), st.gbest_f, cfg.xi, cfg.fitness_denominator))
    mcfg = MutationConfig.for_cardinality(spec.k, cfg.g_max, cfg.swap_gate)
    v_max = cfg.v_max_scale * spec.u
    trace = [_row(fit, st)]
    if observer is not None:
        observer(st)

    while st.g < cfg.g_max:
        st.g += 1
        g = st.g
        sizes = level_sizes(cfg.NP, st.NL)
        lp = sizes[0]

        if mutation:
            M = np.array([mutate(st.X[p], spec, mcfg, g, rng) for p in range(lp)])
            mutate_level_one(st, fit, lp, M)

        s = aggregation_indicator(float(st.f.mean()), st.gbest_f, cfg.xi, cfg.fitness_denominator)
        st.phi = cfg.phi_fixed if algorithm == "dllso" else update_phi(s)

        p1, p2 = _exemplars(sizes, rng)
        movers = np.arange(lp, cfg.NP)
        r = rng.random((movers.size, 3))
        X = st.X[movers]
        V = r[:, :1] * st.V[movers] + r[:, 1:2] * (st.X[p1] - X) + st.phi * r[:, 2:3] * (st.X[p2] - X)
        V = clamp_velocity(V, v_max)
        nb = fit.evaluate(X + V)
        cv = None if st.cv is None else np.vstack([st.cv, nb.cv])
        F = fit.penalize(np.concatenate([st.f, nb.f]), np.concatenate([st.psi, nb.psi]), cv,
                         np.vstack([st.X, nb.X]))
        F_old, F_new = F[: cfg.NP], F[cfg.NP:]
        better = F_new < F_old[movers]
        st.V[movers] = V
        _take(st, movers[better], nb, np.flatnonzero(better))
        st.F = F_old.copy()
        st.F[movers[better]] = F_new[better]
        st.permute(np.argsort(st.F, kind="stable"))

        f_prev = st.gbest_f
        cand_cv = None if st.cv is None else st.cv[0]
        if fit.candidate_wins(st, float(st.f[0]), float(st.psi[0]), cand_cv):
            _set_gbest(st, 0)
        t = relative_improvement(f_prev, st.gbest_f, cfg.xi, cfg.fitness_denominator)
        if algorithm == "dllso":
            st.NL = int(rng.choice(pool))
        elif t < st.t_prev or t == 0:
            st.NL = update_num_levels(st.NL, s, cfg, rng)
        st.t_prev = t
        if handler == "l1":
            fit.l1.step(g, float(st.f[0]), st.cv[0])
        trace.append(_row(fit, st))
        if observer is not None:
            observer(st)

    return RunResult(
        best_x=st.gbest_x,
        best_f=st.gbest_f,
        best_F=fit.gbest_F(st),
        feasible=is_feasible(spec, st.gbest_x).feasible,
        trace=trace,
        label=_label(algorithm, handler, mutation),
    )


def run_pso(model, spec, cfg: SwarmConfig, handler="l1", initial=None, observer=None) -> RunResult:
    """Global-best PSO with linearly varying inertia and acceleration coefficients."""
    rng = np.random.default_rng(cfg.seed)
    fit = _Fitness(model, spec, handler, cfg)
    X0 = initialize_positions(spec, cfg.NP, rng, cfg.d_min, cfg.d_max) if initial is None else np.array(initial, dtype=float)
    b = fit.evaluate(X0)
    st = SwarmState(X=b.X, V=np.zeros_like(b.X), f=b.f, psi=b.psi, F=fit.penalize(b.f, b.psi, b.cv, b.X), cv=b.cv,
                    NL=1, phi=0.0)
    # the particle arrays double as personal bests; current positions live in `pos`
    pos = st.X.copy()
    i = int(np.argmin(st.F))
    _set_gbest(st, i)
    v_max = cfg.v_max_scale * spec.u
    trace = [_row(fit, st)]
    if observer is not None:
        observer(st)
    span = max(cfg.g_max, 1)
    while st.g < cfg.g_max:
        st.g += 1
        frac = st.g / span
        w = cfg.w_max - (cfg.w_max - cfg.w_min) * frac
        c1 = cfg.c_max - (cfg.c_max - cfg.c_min) * frac
        c2 = cfg.c_min + (cfg.c_max - cfg.c_min) * frac
        r1 = rng.random(pos.shape)
        r2 = rng.random(pos.shape)
        st.V = clamp_velocity(w * st.V + c1 * r1 * (st.X - pos) + c2 * r2 * (st.gbest_x - pos), v_max)
        nb = fit.evaluate(pos + st.V)
        pos = nb.X
        cv = None if st.cv is None else np.vstack([st.cv, nb.cv])
        F = fit.penalize(np.concatenate([st.f, nb.f]), np.concatenate([st.psi, nb.psi]), cv, np.vstack([st.X, nb.X]))
        better = F[cfg.NP:] < F[: cfg.NP]
        idx = np.flatnonzero(better)
        _take(st, idx, nb, idx)
        st.F = np.where(better, F[cfg.NP:], F[: cfg.NP])
        i = int(np.argmin(st.F))
        cand_cv = None if st.cv is None else st.cv[i]
        if fit.candidate_wins(st, float(st.f[i]), float(st.psi[i]), cand_cv):
            _set_gbest(st, i)
        if handler == "l1":
            fit.l1.step(st.g, float(st.f[i]), st.cv[i])
        trace.append(_row(fit, st))
        if observer is not None:
            observer(st)
    return RunResult(
        best_x=st.gbest_x,
        best_f=st.gbest_f,
        best_F=fit.gbest_F(st),
        feasible=is_feasible(spec, st.gbest_x).feasible,
        trace=trace,
        label=_label("pso", handler, False),
    )
