import math

import numpy as np
import pytest

from allso_portfolio.backtest import (
    DEFAULT_TIERS,
    BacktestConfig,
    BacktestError,
    BacktestLedger,
    CostTier,
    cagr,
    drawdowns,
    drift_weights,
    ex_post_metrics,
    omega_ratio,
    run_backtest,
    step_wealth,
    transaction_cost,
    validate_tiers,
    write_ledger,
    write_summary,
)
from allso_portfolio.estimation import PricePanel, synthetic_prices
from allso_portfolio.swarm import SwarmConfig

SOLVER = SwarmConfig(NP=20, NL_max=10, NL_init=6, g_max=15)


def _cost_one(value, W=1.0):
    return transaction_cost(np.array([value / W]), np.array([0.0]), W)


def test_tier_examples():
    assert _cost_one(10_000) == pytest.approx(50.0)
    assert _cost_one(5_000) == 40.0
    assert _cost_one(250_000) == 400.0
    assert _cost_one(60_000) == pytest.approx(240.0)
    assert _cost_one(150_000) == pytest.approx(375.0)


def test_tier_boundaries_are_lower_inclusive():
    assert _cost_one(7_999.99) == 40.0
    assert _cost_one(8_000) == pytest.approx(40.0)
    assert _cost_one(49_999.99) == pytest.approx(249.99995)
    assert _cost_one(50_000) == pytest.approx(200.0)
    assert _cost_one(199_999.99) == pytest.approx(499.999975)
    assert _cost_one(200_000) == 400.0


def test_cost_monotone_inside_tiers():
    for t in DEFAULT_TIERS:
        hi = min(t.upper, 1e6)
        vals = np.linspace(max(t.lower, 1.0), hi - 1e-3, 50)
        costs = [_cost_one(v) for v in vals]
        assert np.all(np.diff(costs) >= 0)


def test_zero_trade_costs_nothing():
    x = np.array([0.3, 0.7])
    assert transaction_cost(x, x, 1e7) == 0.0
    assert transaction_cost([0.3, 0.7], [0.25, 0.75], 4e5) == pytest.approx(2 * 100.0)


def test_validate_tiers():
    validate_tiers(DEFAULT_TIERS)
    with pytest.raises(ValueError):
        validate_tiers(DEFAULT_TIERS[1:])
    with pytest.raises(ValueError):
        validate_tiers((CostTier(0, 10, 1, 0), CostTier(11, math.inf, 0, 0)))
    with pytest.raises(ValueError):
        BacktestConfig(window=1)


def test_drift_weights_examples():
    np.testing.assert_allclose(drift_weights([0.5, 0.5], [1.1, 0.9]), [0.55, 0.45])
    np.testing.assert_allclose(drift_weights([0.2, 0.8], [1.05, 1.05]), [0.2, 0.8])
    np.testing.assert_array_equal(drift_weights([0, 1, 0], [2, 0.5, 3]), [0, 1, 0])
    with pytest.raises(BacktestError):
        drift_weights([0, 1], [1.2, 0.0])


def test_step_wealth():
    assert step_wealth(100, 0.0, 0.0) == 100
    assert step_wealth(100, 0.1, 5) == pytest.approx(105)
    assert step_wealth(10, 0.0, 20) == -10


def test_metric_helpers():
    assert omega_ratio([0.1, -0.05]) == pytest.approx(2.0)
    assert omega_ratio([0.1, 0.2]) == math.inf
    assert cagr(121, 100, 24) == pytest.approx(0.1, abs=1e-12)
    assert cagr(100, 100, 10) == 0.0
    np.testing.assert_array_equal(drawdowns([100, 100, 100], 100), [0, 0, 0])
    np.testing.assert_allclose(drawdowns([110, 99, 120], 100), [0, -0.1, 0])
    np.testing.assert_allclose(drawdowns([90, 95], 100), [-0.1, -0.05])


def _ledger(r, cost=None, W0=100.0):
    r = np.asarray(r, dtype=float)
    cost = np.zeros_like(r) if cost is None else np.asarray(cost, dtype=float)
    W, w = W0, []
    for ri, ci in zip(r, cost):
        W = step_wealth(W, ri, ci)
        w.append(W)
    H = r.size
    return BacktestLedger([str(i) for i in range(H)], np.zeros((H, 2)), np.zeros((H, 2)), 1 + r, cost,
                          np.array(w), r, np.zeros(H), W0, np.array(w), "equal-weight")


def test_ex_post_metrics():
    L = _ledger([0.1, -0.05, 0.02], cost=[1, 0, 0.5])
    m = ex_post_metrics(L)
    assert m["sharpe"] == pytest.approx(np.mean(L.ret_out) / np.std(L.ret_out, ddof=1))
    assert m["omega"] == pytest.approx(0.12 / 0.05)
    assert m["cost_pct"] == pytest.approx(np.mean([1 / 100, 0, 0.5 / L.wealth[1]]) * 100)
    assert m["cost_mean"] == pytest.approx(0.5)
    assert m["dd_mean"] <= 0
    with pytest.raises(ValueError):
        ex_post_metrics(_ledger([0.1]))
    with pytest.raises(ValueError):
        ex_post_metrics(_ledger([0.0, 0.0]))
    assert math.isnan(ex_post_metrics(_ledger([0.1]), allow_undefined=True)["sharpe"])


def test_backtest_too_short_names_required_length():
    panel = synthetic_prices(10, 20, seed=0)
    with pytest.raises(BacktestError, match="needs 26 price rows"):
        run_backtest(panel, BacktestConfig(window=20, horizon=5, k=4, u=0.4, solver=SOLVER))


@pytest.fixture(scope="module")
def ledger():
    panel = synthetic_prices(20, 40, seed=2)
    return run_backtest(panel, BacktestConfig(window=25, horizon=8, k=0.3, u=0.3, solver=SOLVER))


def test_ledger_invariants(ledger):
    assert ledger.wealth.size == 8
    Wp = ledger.wealth_prev
    np.testing.assert_allclose(ledger.wealth, Wp * (1 + ledger.ret_out) - ledger.cost, atol=1e-6)
    assert ledger.turnover[0] == pytest.approx(1.0)
    assert np.all(ledger.turnover[1:] <= 0.2 + 1e-9)
    np.testing.assert_allclose(ledger.drifted[0], 0)
    assert np.all(drawdowns(ledger.wealth, ledger.W0) <= 0)
    assert np.all(ledger.n_assets <= 6)
    np.testing.assert_allclose(ledger.weights.sum(axis=1), 1, atol=1e-9)
    assert set(ledger.summary) == {"sharpe", "omega", "cagr", "dd_mean", "dd_std", "cost_mean", "cost_pct"}


def test_costs_match_trades(ledger):
    for i in range(ledger.wealth.size):
        assert ledger.cost[i] == pytest.approx(transaction_cost(ledger.weights[i], ledger.drifted[i], ledger.wealth_prev[i]))


def test_backtest_deterministic_and_written(ledger, tmp_path):
    panel = synthetic_prices(20, 40, seed=2)
    again = run_backtest(panel, BacktestConfig(window=25, horizon=8, k=0.3, u=0.3, solver=SOLVER))
    np.testing.assert_array_equal(again.wealth, ledger.wealth)
    write_ledger(ledger, tmp_path / "l.csv")
    write_summary(ledger, tmp_path / "s.txt")
    lines = (tmp_path / "l.csv").read_text().splitlines()
    assert lines[0] == "t,date,cost,wealth,ret_out,turnover,n_assets" and len(lines) == 9
    assert "benchmark = equal-weight" in (tmp_path / "s.txt").read_text()


def test_single_period_backtest():
    panel = synthetic_prices(10, 12, seed=1)
    L = run_backtest(panel, BacktestConfig(window=10, horizon=1, k=4, u=0.4, solver=SOLVER))
    assert L.wealth.size == 1 and math.isnan(L.summary["sharpe"])
    assert L.summary["cagr"] == pytest.approx((L.wealth[0] / L.W0) ** 12 - 1)


def test_value_weight_benchmark():
    panel = synthetic_prices(10, 14, seed=1)
    caps = np.arange(1, 11, dtype=float)
    L = run_backtest(panel, BacktestConfig(window=10, horizon=2, k=4, u=0.4, solver=SOLVER), cap_weights=caps)
    r = panel.prices[11:13] / panel.prices[10:12] - 1
    np.testing.assert_allclose(L.benchmark_wealth, 1e7 * np.cumprod(1 + r @ caps / caps.sum()))
    assert L.benchmark_label == "value-weight"


def test_dominant_asset_held_at_upper_bound_every_period():
    rng = np.random.default_rng(0)
    T, n = 40, 6
    R = rng.normal(0.0, 0.04, (T - 1, n))
    R[:, 0] = 0.03 + rng.normal(0, 0.002, T - 1)
    prices = 100 * np.vstack([np.ones(n), np.cumprod(1 + R, axis=0)])
    panel = PricePanel([f"S{i}" for i in range(n)], [f"{i:03d}" for i in range(T)], prices)
    L = run_backtest(panel, BacktestConfig(window=20, horizon=6, k=3, l=0.05, u=0.5, TR=0.5,
                                           solver=SwarmConfig(NP=30, NL_max=15, g_max=40)))
    np.testing.assert_allclose(L.weights[:, 0], 0.5, atol=1e-9)
