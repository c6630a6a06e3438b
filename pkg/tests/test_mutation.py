import numpy as np
import pytest

from allso_portfolio.model import ConstraintSpec
from allso_portfolio.mutation import MutationConfig, mutate, p_swap, refine_mutation, swap_mutation, swap_probability


def _random_member(spec, rng):
    m = int(rng.integers(1, spec.k + 1))
    idx = rng.choice(spec.n, m, replace=False)
    x = np.zeros(spec.n)
    x[idx] = rng.uniform(spec.l[idx], spec.u[idx])
    return x


def test_p_swap_values():
    assert p_swap(0) == 0.5
    assert p_swap(2000) == pytest.approx(0.9999546, abs=1e-7)
    g = np.arange(0, 3000, 37)
    assert np.all(np.diff([p_swap(int(v)) for v in g]) >= 0)


def test_gate_directions():
    assert swap_probability(0, "prose") == swap_probability(0, "literal") == 0.5
    assert swap_probability(1000, "prose") < 0.5 < swap_probability(1000, "literal")
    with pytest.raises(ValueError):
        MutationConfig(1, 10, gate="sideways")


def test_k_max_swap_floor():
    assert MutationConfig.for_cardinality(10, 100).k_max_swap == 1
    assert MutationConfig.for_cardinality(60, 100).k_max_swap == 3


def test_swap_affine_map_hand_case():
    spec = ConstraintSpec(k=1, l=np.array([0.1, 0.2]), u=np.array([0.5, 1.0]))
    out = swap_mutation(np.array([0.3, 0.0]), spec, MutationConfig(1, 10), np.random.default_rng(0))
    np.testing.assert_allclose(out, [0.0, 0.2 + 0.5 * 0.8])


def test_swap_map_endpoints_and_midpoint():
    l = np.array([0.1, 0.2])
    u = np.array([0.5, 0.6])
    spec = ConstraintSpec(k=2, l=l, u=u)
    cfg = MutationConfig(1, 10)
    for xb, expect in ((0.1, 0.2), (0.5, 0.6), (0.3, 0.4)):
        out = swap_mutation(np.array([xb, 0.0]), spec, cfg, np.random.default_rng(1))
        assert out[1] == pytest.approx(expect) and out[0] == 0.0


def test_swap_uniform_bounds_moves_value_unchanged():
    spec = ConstraintSpec.uniform(6, 3, 0.05, 0.6)
    x = np.array([0.3, 0.0, 0.45, 0.0, 0.25, 0.0])
    rng = np.random.default_rng(2)
    for _ in range(50):
        out = swap_mutation(x, spec, MutationConfig(2, 10), rng)
        assert sorted(out[out > 0]) == pytest.approx(sorted(x[x > 0]))
        changed = np.flatnonzero(out != x)
        assert changed.size % 2 == 0
        assert (out[changed] > 0).sum() == changed.size // 2


def test_swap_degenerate_input_unchanged():
    spec = ConstraintSpec.uniform(3, 3, 0.05, 0.6)
    x = np.array([0.3, 0.3, 0.4])
    out = swap_mutation(x, spec, MutationConfig(1, 10), np.random.default_rng(0))
    np.testing.assert_array_equal(out, x)
    assert out is not x


def test_refine_keeps_support_and_box():
    rng = np.random.default_rng(3)
    spec = ConstraintSpec.uniform(10, 4, 0.05, 0.5)
    cfg = MutationConfig(1, 100)
    for _ in range(100):
        x = _random_member(spec, rng)
        g = int(rng.integers(0, 101))
        out = refine_mutation(x, spec, cfg, g, rng)
        np.testing.assert_array_equal(out > 0, x > 0)
        nz = out > 0
        assert np.all((out[nz] >= spec.l[nz]) & (out[nz] <= spec.u[nz]))
    with pytest.raises(ValueError):
        refine_mutation(x, spec, cfg, 101, rng)


def test_refine_window_narrows_at_the_end():
    spec = ConstraintSpec.uniform(4, 4, 0.05, 0.5)
    cfg = MutationConfig(1, 100)
    x = np.array([0.25, 0.25, 0.25, 0.25])
    out = refine_mutation(x, spec, cfg, 100, np.random.default_rng(4))
    assert np.all(np.abs(out - x) <= 0.45 / 101 + 1e-15)


def test_mutate_branches_and_determinism():
    spec = ConstraintSpec.uniform(8, 4, 0.05, 0.5)
    x = np.array([0.3, 0.2, 0.0, 0.25, 0.0, 0.25, 0.0, 0.0])
    cfg = MutationConfig(1, 100, gate="literal")
    a = mutate(x, spec, cfg, 5, np.random.default_rng(7))
    b = mutate(x, spec, cfg, 5, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)
    swaps = refines = 0
    rng = np.random.default_rng(8)
    for _ in range(400):
        out = mutate(x, spec, MutationConfig(1, 1000, gate="prose"), 1000, rng)
        if np.array_equal(out > 0, x > 0):
            refines += 1
        else:
            swaps += 1
            assert np.count_nonzero(out != x) == 2
    # 1 - p_swap(1000) is about 0.0067
    assert swaps < 20 and refines > 380
