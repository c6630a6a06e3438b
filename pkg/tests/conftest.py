import numpy as np
import pytest

from allso_portfolio.estimation import compute_returns, estimate_model, synthetic_prices
from allso_portfolio.model import ConstraintSpec
from allso_portfolio.swarm import random_feasible_portfolio

_RESULTS = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's outcome for the end-of-session summary."""

    def record(num: int, name: str, passed: bool, detail: str = ""):
        _RESULTS[num] = (name, bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_RESULTS):
        name, ok, detail = _RESULTS[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {name}: {detail}")


@pytest.fixture(scope="session")
def small_problem():
    """n=50 synthetic market with a random feasible current portfolio, k=10, TR=0.2."""
    panel = synthetic_prices(50, 120, seed=11)
    model = estimate_model(compute_returns(panel))
    cold = ConstraintSpec.uniform(50, 10, 0.001, 0.2, 1.0)
    x0 = random_feasible_portfolio(cold, np.random.default_rng(5))
    return model, ConstraintSpec.uniform(50, 10, 0.001, 0.2, 0.2, x0)
