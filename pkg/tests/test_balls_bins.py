import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demlab.balls_bins import (
    INCREMENT_BOUND,
    bb_enumerated_drift,
    bb_exact_drift,
    bb_init,
    bb_run,
    bb_step,
    horizon,
)
from demlab.errors import ParameterError


def test_init_examples():
    s = bb_init(5)
    assert s.histogram() == {0: 5} and s.i == 0
    assert s.X(0) == 5 and all(s.X(k) == 0 for k in range(1, 6))
    a, b = bb_init(50, seed=9), bb_init(50, seed=9)
    for _ in range(100):
        bb_step(a)
        bb_step(b)
    assert np.array_equal(a.loads, b.loads)


def test_init_rejects_empty():
    with pytest.raises(ParameterError):
        bb_init(0)


def test_single_bin_is_forced():
    s = bb_init(1)
    for i in range(1, 6):
        bb_step(s)
        assert s.histogram() == {i: 1}


def test_first_step_histogram():
    s = bb_step(bb_init(5, seed=3))
    assert s.histogram() == {0: 4, 1: 1}


def test_conservation_after_a_million_steps():
    s = bb_init(1000, seed=1)
    for _ in range(10**6):
        bb_step(s)
    assert s.i == 10**6
    s.check_invariants()


@settings(max_examples=30)
@given(st.integers(1, 40), st.integers(0, 300), st.integers(0, 2**32))
def test_conservation_at_every_step(n, m, seed):
    s = bb_init(n, seed)
    for _ in range(m):
        bb_step(s)
        assert s.hist.sum() == n
        assert (np.arange(len(s.hist)) * s.hist).sum() == s.i
    s.check_invariants()


def test_exact_drift_examples():
    s = bb_init(10)
    assert bb_exact_drift(s, 0) == -1.0
    s.loads[:] = [1, 1, 1, 1, 1, 2, 2, 2, 0, 0]
    s.hist[:3] = [2, 5, 3]
    s.i = 11
    s.check_invariants()
    assert bb_exact_drift(s, 2) == pytest.approx(0.2)
    assert bb_exact_drift(s, 0) == -0.2
    assert bb_enumerated_drift(s, 2) == Fraction(1, 5)
    with pytest.raises(ParameterError):
        bb_exact_drift(s, -1)


@given(st.integers(1, 12), st.integers(0, 40), st.integers(0, 2**32), st.integers(0, 6))
def test_exact_drift_matches_enumeration(n, m, seed, k):
    s = bb_init(n, seed)
    for _ in range(m):
        bb_step(s)
    exact = Fraction(s.X(k - 1) - s.X(k), n)
    assert bb_enumerated_drift(s, k) == exact
    assert bb_exact_drift(s, k) == pytest.approx(float(exact), abs=1e-15)


def test_run_matches_step_by_step_state():
    n, m, seed = 200, 300, 17
    run = bb_run(n, m, kappa=3, envelope="selfcorrect", seed=seed)
    s = bb_init(n, seed)
    for _ in range(m):
        bb_step(s)
    assert np.array_equal(run.final_hist[: len(s.hist)], s.hist[: len(run.final_hist)])
    for k in range(4):
        assert run.X(k) == s.X(k)


def test_run_is_deterministic():
    a = bb_run(1000, 700, seed=5)
    b = bb_run(1000, 700, seed=5)
    assert np.array_equal(a.trace.values, b.trace.values)
    assert np.array_equal(a.plus, b.plus) and np.array_equal(a.minus, b.minus)


def test_zero_balls_is_inside_envelope():
    run = bb_run(10**4, 0, kappa=2)
    assert run.X(0) == 10**4 and not run.violated
    assert run.trace.values.shape == (1, 3)


def test_final_x0_near_trajectory():
    n = 10**5
    run = bb_run(n, n, kappa=0, seed=11)
    eps1 = n ** (-1 / 3) * math.exp(3)
    assert abs(run.X(0) - n * math.exp(-1)) <= n * eps1


def test_horizon_enforced():
    n = 1000
    assert horizon(n, "basic") == math.floor(n * math.log(n) / 9)
    assert horizon(n, "selfcorrect", 0.1) == math.floor(0.4 * n * math.log(n))
    with pytest.raises(ParameterError):
        bb_run(n, horizon(n, "basic") + 1)
    with pytest.raises(ParameterError):
        bb_run(n, 10, envelope="selfcorrect", alpha=0.5)
    with pytest.raises(ParameterError):
        bb_run(n, 10, envelope="other")
    bb_run(n, horizon(n, "basic"), kappa=1)


def test_recorded_trace_consistent_with_conservation():
    run = bb_run(500, 600, kappa=30, envelope="selfcorrect", seed=2)
    # with kappa this large every bin is counted
    assert np.all(run.trace.values.sum(axis=1) == 500)
    assert np.array_equal(run.trace.values @ np.arange(31), run.trace.steps)


def test_recorded_drift_is_exact_formula():
    run = bb_run(300, 200, kappa=3, envelope="selfcorrect", seed=8)
    X = run.trace.values
    for i in range(len(run.trace.steps) - 1):
        prev = np.concatenate([[0.0], X[i, :-1]])
        assert np.allclose(run.drift[i], (prev - X[i]) / 300, atol=1e-15)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_supermartingale_and_submartingale_drift(seed):
    n = 10**4
    run = bb_run(n, horizon(n, "basic"), kappa=4, seed=seed, stride=50)
    assert run.drift_checked_steps > 0
    assert np.all(run.max_plus_drift <= 0)
    assert np.all(run.min_minus_drift >= 0)


def test_transform_increments_bounded():
    n = 10**4
    run = bb_run(n, horizon(n, "basic"), kappa=4, seed=4, stride=100)
    assert np.all(run.max_increment <= INCREMENT_BOUND)
    assert np.all(run.max_increment <= 2 + 3 + 10 * n ** (-1 / 3))


def test_selfcorrect_containment_statistical():
    n, alpha, reps = 10**4, 0.1, 200
    m = math.floor(0.4 * n * math.log(n))
    inside = sum(
        not bb_run(n, m, kappa=3, envelope="selfcorrect", alpha=alpha, seed=r, stride=m,
                   check_drift=False).violated
        for r in range(reps)
    )
    assert inside >= 0.95 * reps


def test_selfcorrect_critical_entries_have_positive_lambda():
    n = 10**4
    m = math.floor(0.4 * n * math.log(n))
    run = bb_run(n, m, kappa=3, envelope="selfcorrect", seed=1, stride=m, check_drift=False)
    for e in run.critical_entries:
        assert e.lam > 0 and 0 <= e.k <= 3 and 1 <= e.step <= m
