"""Command-line entry point: ``optimize``, ``compare`` and ``backtest``."""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from .backtest import BacktestConfig, BacktestError, run_backtest, write_ledger, write_summary, write_weights
from .config import ConfigError, load_config, swarm_config
from .estimation import DataError, PricePanel, compute_returns, estimate_model, load_prices, synthetic_prices
from .model import ConstraintSpec, resolve_cardinality
from .swarm import ALGORITHMS, HANDLERS, initialize_positions, random_feasible_portfolio, run

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2


# ---------------------------------------------------------------------------
# inputs


def load_panel(cfg: dict) -> PricePanel:
    if cfg["prices"]:
        return load_prices(cfg["prices"])
    if cfg["synthetic_n"] > 0 and cfg["synthetic_T"] > 0:
        return synthetic_prices(cfg["synthetic_n"], cfg["synthetic_T"], seed=cfg["synthetic_seed"])
    raise ConfigError("no data: set 'prices' or both 'synthetic_n' and 'synthetic_T'")


def read_x0(path, tickers) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"x0 file not found: {p}")
    pos = {t: i for i, t in enumerate(tickers)}
    x0 = np.zeros(len(tickers))
    with open(p, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["ticker"] not in pos:
                raise DataError(f"{p}: unknown ticker {row['ticker']!r}")
            x0[pos[row["ticker"]]] = float(row["weight"])
    return x0


def build_problem(cfg: dict):
    panel = load_panel(cfg)
    model = estimate_model(compute_returns(panel), cfg["r_f"], cfg["shrinkage"])
    n = panel.n
    k = resolve_cardinality(cfg["k"], n)
    if cfg["x0"]:
        x0 = read_x0(cfg["x0"], panel.tickers)
    elif cfg["TR"] >= 1.0:
        x0 = None  # turnover cannot bind: start from cash
    else:
        # a random feasible current portfolio, fixed by the config seed
        cold = ConstraintSpec.uniform(n, k, cfg["l"], cfg["u"], 1.0)
        x0 = random_feasible_portfolio(cold, np.random.default_rng(cfg["seed"]))
    spec = ConstraintSpec.uniform(n, k, cfg["l"], cfg["u"], cfg["TR"], x0)
    return panel, model, spec


def parse_cell(name: str) -> tuple[str, str, bool]:
    """``allso-mut-h`` -> ``("allso", "hybrid", True)``."""
    parts = name.strip().lower().split("-")
    if len(parts) not in (2, 3) or parts[0] not in ALGORITHMS or parts[-1] not in ("h", "l1"):
        raise ConfigError(f"bad grid cell {name!r}; expected <allso|dllso|pso>[-mut]-<h|l1>")
    if len(parts) == 3 and parts[1] != "mut":
        raise ConfigError(f"bad grid cell {name!r}")
    return parts[0], "hybrid" if parts[-1] == "h" else "l1", len(parts) == 3


def _check_modes(cfg):
    if cfg["handler"] not in HANDLERS:
        raise ConfigError(f"handler must be one of {HANDLERS}")
    if cfg["algorithm"] not in ALGORITHMS:
        raise ConfigError(f"algorithm must be one of {ALGORITHMS}")


# ---------------------------------------------------------------------------
# statistics


def describe(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {
        "best": float(v.min()),
        "mean": float(v.mean()),
        "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
        "min": float(v.min()),
        "max": float(v.max()),
    }


def relative_change(a, b) -> float:
    """Percent change of mean ``a`` against mean ``b``, positive when ``a`` is lower for negative objectives."""
    ma, mb = float(np.mean(a)), float(np.mean(b))
    return (ma - mb) / mb * 100.0 if mb != 0 else 0.0


def paired_p_value(a, b) -> float:
    """Left-sided paired t-test of ``a < b``; degenerate differences give 1 or 0."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if d.size < 2 or np.all(d == d[0]):
        return 1.0 if d.size == 0 or d[0] >= 0 else 0.0
    return float(stats.ttest_rel(a, b, alternative="less").pvalue)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


# ---------------------------------------------------------------------------
# subcommands


def cmd_optimize(cfg: dict, out: Path) -> int:
    _check_modes(cfg)
    panel, model, spec = build_problem(cfg)
    results = []
    for i in range(cfg["runs"]):
        sc = swarm_config(cfg, cfg["seed"] + i)
        results.append(run(model, spec, sc, handler=cfg["handler"], mutation=cfg["mutation"], algorithm=cfg["algorithm"]))
    best = min(results, key=lambda r: (not r.feasible, r.best_f))
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "portfolio.csv", ["ticker", "weight"],
                [(t, w) for t, w in zip(panel.tickers, best.best_x) if w > 0])
    (out / "trace.csv").write_text(best.trace_csv(), encoding="utf-8")
    st = describe([r.best_f for r in results])
    lines = [f"label = {best.label}", f"runs = {len(results)}", f"n = {spec.n}", f"k = {spec.k}"]
    lines += [f"{k}_f = {v!r}" for k, v in st.items()]
    lines += [f"best_msr = {-st['best']!r}", f"feasible_runs = {sum(r.feasible for r in results)}"]
    (out / "stats.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{best.label}: best f {st['best']:.6g}, mean {st['mean']:.6g} over {len(results)} runs -> {out}")
    return EXIT_OK if all(r.feasible for r in results) else EXIT_RUNTIME


def cmd_compare(cfg: dict, out: Path) -> int:
    cells = [parse_cell(c) for c in cfg["grid"].split(",") if c.strip()]
    if len(cells) < 2:
        raise ConfigError("compare needs at least two grid cells")
    _, model, spec = build_problem(cfg)
    values = {c: [] for c in cells}
    for i in range(cfg["runs"]):
        sc = swarm_config(cfg, cfg["seed"] + i)
        # every cell of run i starts from the same population
        init = initialize_positions(spec, sc.NP, np.random.default_rng(sc.seed), sc.d_min, sc.d_max)
        for alg, handler, mut in cells:
            r = run(model, spec, sc, handler=handler, mutation=mut, algorithm=alg, initial=init)
            values[(alg, handler, mut)].append(r.best_f)
    labels = {c: f"{c[0]}{'-mut' if c[2] else ''}-{'h' if c[1] == 'hybrid' else 'l1'}" for c in cells}
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "compare.csv", ["cell", "mean", "std", "min", "max"],
                [(labels[c], *(describe(v)[s] for s in ("mean", "std", "min", "max"))) for c, v in values.items()])
    pairs = []
    for a, b in itertools.combinations(cells, 2):
        p = paired_p_value(values[a], values[b])
        pairs.append((labels[a], labels[b], relative_change(values[a], values[b]), p, "yes" if p < cfg["alpha"] else "no"))
    _write_rows(out / "pairs.csv", ["a", "b", "rel_change_pct", "p_value", "significant"], pairs)
    for row in pairs:
        print(f"{row[0]} vs {row[1]}: change {row[2]:+.3f}%  p={row[3]:.4g}")
    return EXIT_OK


def backtest_config(cfg: dict, k) -> BacktestConfig:
    _check_modes(cfg)
    try:
        return BacktestConfig(
            window=cfg["window"], horizon=cfg["horizon"], W0=cfg["W0"], k=k, l=cfg["l"], u=cfg["u"],
            TR=cfg["TR"], r_f=cfg["r_f"], shrinkage=cfg["shrinkage"], periods_per_year=cfg["periods_per_year"],
            handler=cfg["handler"], mutation=cfg["mutation"], algorithm=cfg["algorithm"],
            solver=swarm_config(cfg, cfg["seed"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_backtest(cfg: dict, out: Path, k_grid=None) -> int:
    panel = load_panel(cfg)
    grid = k_grid or [cfg["k"]]
    configs = [backtest_config(cfg, k) for k in grid]
    for bc in configs:
        # an empty feasible set is a config error; catch it before any period runs
        ConstraintSpec.uniform(panel.n, bc.cardinality(panel.n), bc.l, bc.u)
    for k, bc in zip(grid, configs):
        ledger = run_backtest(panel, bc)
        dest = out / f"k_{k:g}" if k_grid else out
        dest.mkdir(parents=True, exist_ok=True)
        write_ledger(ledger, dest / "ledger.csv")
        write_summary(ledger, dest / "summary.txt", {"k": bc.cardinality(panel.n), "horizon": bc.horizon})
        write_weights(ledger, panel.tickers, dest / "weights.csv")
        s = ledger.summary
        print(f"k={k:g}: final wealth {ledger.wealth[-1]:.2f}, SR {s['sharpe']:.4f}, CAGR {s['cagr']:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="allso-portfolio", description="Constrained swarm optimisation of the modified Sharpe ratio.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("optimize", "compare", "backtest"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--runs", type=int)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
        if name == "backtest":
            p.add_argument("--k-grid", help="comma-separated cardinality fractions, one backtest each")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.runs is not None:
            cfg["runs"] = args.runs
        if cfg["runs"] < 1:
            raise ConfigError("runs must be >= 1")
        out = Path(args.out)
        if args.command == "optimize":
            return cmd_optimize(cfg, out)
        if args.command == "compare":
            return cmd_compare(cfg, out)
        k_grid = [float(v) for v in args.k_grid.split(",")] if args.k_grid else None
        return cmd_backtest(cfg, out, k_grid)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BacktestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
