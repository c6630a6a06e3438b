import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from allso_portfolio.model import (
    ConstraintSpec,
    MarketModel,
    Portfolio,
    feasible_mask,
    is_feasible,
    modified_sharpe,
    objective,
    objective_batch,
    portfolio_return,
    portfolio_risk,
    resolve_cardinality,
)

M2 = MarketModel(mu=[0.1, 0.2], cov=np.diag([0.04, 0.09]))


def test_portfolio_return_examples():
    assert portfolio_return(M2, [1, 0]) == pytest.approx(0.1)
    assert portfolio_return(M2, [0.5, 0.5]) == pytest.approx(0.15)
    assert portfolio_return(M2, [0, 0]) == 0.0


def test_portfolio_risk_examples():
    assert portfolio_risk(M2, [1, 0]) == pytest.approx(0.2)
    assert portfolio_risk(M2, [0.5, 0.5]) == pytest.approx(np.sqrt(0.0325))
    assert portfolio_risk(M2, [0, 0]) == 0.0


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        portfolio_return(M2, [1, 0, 0])
    with pytest.raises(ValueError):
        portfolio_risk(M2, [1])


def test_modified_sharpe_branches():
    assert modified_sharpe(M2, [0.5, 0.5]) == pytest.approx(0.15 / np.sqrt(0.0325))
    assert modified_sharpe(M2, [0.5, 0.5]) == pytest.approx(0.832050, abs=1e-6)
    flat = MarketModel(mu=[0.0, 0.0], cov=np.diag([0.04, 0.09]))
    assert modified_sharpe(flat, [1, 0]) == 0.0
    neg = MarketModel(mu=[-0.05, 0.0], cov=np.diag([0.04, 0.09]))
    assert modified_sharpe(neg, [1, 0]) == pytest.approx(-0.01)
    assert objective(neg, [1, 0]) == pytest.approx(0.01)
    assert objective(M2, [0.5, 0.5]) == -modified_sharpe(M2, [0.5, 0.5])


def test_risk_free_rate_shifts_excess():
    m = MarketModel(mu=[0.1, 0.2], cov=np.diag([0.04, 0.09]), r_f=0.05)
    assert modified_sharpe(m, [1, 0]) == pytest.approx(0.05 / 0.2)


def test_zero_risk_positive_excess_is_an_error():
    m = MarketModel(mu=[0.1, 0.2], cov=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        modified_sharpe(m, [1, 0])
    with pytest.raises(ValueError):
        objective_batch(m, np.array([[1.0, 0.0]]))


def test_market_model_validation():
    with pytest.raises(ValueError):
        MarketModel(mu=[0.1, 0.2], cov=[[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(ValueError):
        MarketModel(mu=[0.1, 0.2], cov=[[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        MarketModel(mu=[0.1, 0.2], cov=np.eye(3))


def test_msr_continuous_at_zero_excess():
    for sigma in (0.01, 0.5, 3.0):
        m = MarketModel(mu=[0.0], cov=[[sigma**2]])
        assert modified_sharpe(m, [1.0]) == 0.0
        # approaching from either side
        up = MarketModel(mu=[1e-12], cov=[[sigma**2]])
        down = MarketModel(mu=[-1e-12], cov=[[sigma**2]])
        assert abs(modified_sharpe(up, [1.0])) < 1e-10
        assert abs(modified_sharpe(down, [1.0])) < 1e-10


def test_msr_matches_classical_sharpe_for_positive_excess():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = rng.integers(2, 6)
        A = rng.normal(size=(n, n))
        m = MarketModel(mu=rng.uniform(0.01, 0.2, n), cov=A @ A.T + 0.01 * np.eye(n), r_f=0.005)
        w = rng.dirichlet(np.ones(n))
        classic = (w @ m.mu - m.r_f) / np.sqrt(w @ m.cov @ w)
        assert modified_sharpe(m, w) == pytest.approx(classic, rel=1e-12)


@given(st.floats(-1, 1).filter(lambda e: abs(e) > 1e-6), st.floats(0.01, 1), st.floats(1.01, 3))
def test_msr_decreases_in_volatility(excess, sigma, scale):
    lo = MarketModel(mu=[excess], cov=[[sigma**2]])
    hi = MarketModel(mu=[excess], cov=[[(scale * sigma) ** 2]])
    assert modified_sharpe(hi, [1.0]) < modified_sharpe(lo, [1.0])


def test_objective_batch_matches_scalar():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(5, 5))
    m = MarketModel(mu=rng.normal(0, 0.1, 5), cov=A @ A.T)
    X = rng.dirichlet(np.ones(5), size=20)
    np.testing.assert_allclose(objective_batch(m, X), [objective(m, x) for x in X], rtol=1e-12)


def test_constraint_spec_validation():
    ConstraintSpec.uniform(3, 2, 0.1, 0.6)
    with pytest.raises(ValueError):
        ConstraintSpec.uniform(3, 4, 0.1, 0.6)
    with pytest.raises(ValueError):
        ConstraintSpec.uniform(3, 1, 0.1, 0.6)  # a single asset cannot reach the budget
    with pytest.raises(ValueError):
        ConstraintSpec.uniform(3, 2, 0.6, 0.5)
    with pytest.raises(ValueError):
        ConstraintSpec.uniform(3, 2, 0.1, 0.6, x0=[0.5, 0.2, 0.0])
    assert ConstraintSpec.uniform(3, 2, 0.1, 0.6).cold_start


def test_portfolio_support():
    p = Portfolio([0.5, 0.0, 0.5])
    np.testing.assert_array_equal(p.support, [0, 2])
    with pytest.raises(ValueError):
        Portfolio([1.2, -0.2])


def test_is_feasible_examples():
    x0 = np.array([0.5, 0.5, 0.0])
    spec = ConstraintSpec.uniform(3, 2, 0.1, 0.9, 0.2, x0)
    rep = is_feasible(spec, x0)
    assert rep.feasible and rep.turnover_slack == pytest.approx(0.2)
    rep = is_feasible(spec, [0.4, 0.4, 0.2])
    assert not rep.feasible and "cardinality" in rep.violated

    spec2 = ConstraintSpec(k=2, l=np.full(2, 0.1), u=np.full(2, 0.9), TR=0.2, x0=np.array([0.5, 0.5]))
    rep = is_feasible(spec2, [0.7, 0.3])
    assert not rep.feasible and rep.violated == ["turnover"]
    assert rep.turnover == pytest.approx(0.4)


def test_support_counts_values_below_lower_bound():
    spec = ConstraintSpec.uniform(3, 3, 0.1, 0.9)
    rep = is_feasible(spec, [0.05, 0.45, 0.5])
    assert rep.cardinality == 3 and rep.violated == ["box"]


def test_feasible_mask_agrees_with_is_feasible():
    rng = np.random.default_rng(2)
    x0 = np.array([0.3, 0.3, 0.4, 0, 0, 0])
    spec = ConstraintSpec.uniform(6, 3, 0.05, 0.5, 0.3, x0)
    X = np.where(rng.random((300, 6)) < 0.5, 0, rng.random((300, 6)))
    X[:100] /= np.maximum(X[:100].sum(axis=1, keepdims=True), 1e-12)
    X[100] = x0
    np.testing.assert_array_equal(feasible_mask(spec, X), [is_feasible(spec, x).feasible for x in X])


def test_resolve_cardinality():
    assert resolve_cardinality(0.3, 200) == 60
    assert resolve_cardinality(0.02, 10) == 1
    assert resolve_cardinality(7, 10) == 7
    with pytest.raises(ValueError):
        resolve_cardinality(0, 10)


@settings(max_examples=50)
@given(st.integers(2, 8), st.integers(0, 10_000))
def test_objective_is_negative_msr(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    m = MarketModel(mu=rng.normal(0, 0.1, n), cov=A @ A.T + 1e-3 * np.eye(n))
    w = rng.dirichlet(np.ones(n))
    assert objective(m, w) == -modified_sharpe(m, w)
