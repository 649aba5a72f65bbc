import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from demlab.errors import DomainError, IntegrationError, ParameterError
from demlab.trajectories import (
    ClosedFormFamily,
    ErrorFunctionSpec,
    OdeSystem,
    balls_system,
    balls_x,
    balls_x_prime,
    components_system,
    components_y,
    components_y_prime,
    eps_bb_basic,
    eval_balls_trajectory,
    eval_components_trajectory,
    eval_error,
    eval_matching_trajectory,
    integrate_rk4,
    taylor_residual,
    verify_tree_identity,
)

GRID = np.linspace(0.0, 3.0, 1000)


# --- closed forms ------------------------------------------------------------


@pytest.mark.parametrize(
    "k,t,expected", [(0, 0.0, 1.0), (1, 1.0, 0.3678794), (2, 2.0, 0.2706706)]
)
def test_balls_trajectory_examples(k, t, expected):
    assert eval_balls_trajectory(k, t) == pytest.approx(expected, abs=1e-7)


def test_balls_trajectory_domain():
    with pytest.raises(DomainError):
        eval_balls_trajectory(1, -0.1)


def test_balls_trajectory_large_k_matches_log_space():
    for k in (21, 40, 100):
        t = float(k)
        ref = math.exp(k * math.log(t) - t - math.lgamma(k + 1))
        assert eval_balls_trajectory(k, t) == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize(
    "k,t,expected", [(1, 0.0, 1.0), (2, 0.25, 0.0919699), (3, 0.5, 0.0248935)]
)
def test_components_trajectory_examples(k, t, expected):
    assert eval_components_trajectory(k, t) == pytest.approx(expected, abs=1e-7)


def test_components_trajectory_domain():
    with pytest.raises(DomainError):
        eval_components_trajectory(0, 0.3)
    assert eval_components_trajectory(2, 0.0) == 0.0


@pytest.mark.parametrize("d,t,expected", [(100, 0.0, 100), (100, 0.25, 50), (7, 0.5, 0)])
def test_matching_trajectory_examples(d, t, expected):
    assert eval_matching_trajectory(d, t) == expected


@pytest.mark.parametrize("t", [-0.01, 0.51])
def test_matching_trajectory_domain(t):
    with pytest.raises(DomainError):
        eval_matching_trajectory(10, t)


@given(st.floats(0, 50), st.integers(0, 60))
def test_balls_partial_sums_below_one(t, K):
    xs = [balls_x(k, t) for k in range(K + 1)]
    assert all(x >= 0 for x in xs)
    assert sum(xs) <= 1 + 1e-12


@given(st.floats(0, 20), st.integers(1, 30))
def test_components_non_negative(t, k):
    assert components_y(k, t) >= 0


def test_family_dispatch():
    assert ClosedFormFamily("balls")(1, 1.0) == pytest.approx(math.exp(-1))
    assert ClosedFormFamily("matching-degree", d=10).curve(0)(0.25) == 5.0
    with pytest.raises(ParameterError):
        ClosedFormFamily("queues")


# --- error functions ---------------------------------------------------------


def test_error_examples():
    eps, delta = eval_error(ErrorFunctionSpec("bb-basic", n=1000), 0.0)
    assert eps == pytest.approx(0.1, rel=1e-15) and delta is None
    for kappa in (1, 3, 6):
        assert eval_error(ErrorFunctionSpec("components", n=8000, kappa=kappa), 0.0)[0] == pytest.approx(0.05)
    assert eval_error(ErrorFunctionSpec("matching", s=60.70), 0.25)[0] == pytest.approx(971.2)


def test_matching_error_undefined_at_p_zero():
    with pytest.raises(DomainError):
        eval_error(ErrorFunctionSpec("matching", s=1.0), 0.5)


@given(st.integers(10, 10**9), st.floats(0.001, 0.49), st.floats(0, 50))
def test_selfcorrect_delta_below_eps(n, alpha, t):
    eps, delta = eval_error(ErrorFunctionSpec("bb-selfcorrect", n=n, alpha=alpha), t)
    assert 0 < delta < eps
    base = n ** (-0.5 + alpha / 2)
    assert eps == pytest.approx(base * (1 + t))
    assert delta == pytest.approx(base * (0.5 + t))


def test_error_spec_rejects_unknowns():
    with pytest.raises(ParameterError):
        ErrorFunctionSpec("bb-fancy")
    with pytest.raises(ParameterError):
        ErrorFunctionSpec("bb-selfcorrect", n=10, alpha=0.7)
    with pytest.raises(ParameterError):
        ErrorFunctionSpec("bb-basic").delta(0.0)


# --- integration -------------------------------------------------------------


def test_rk4_exponential_decay():
    sys = OdeSystem("decay", lambda t, y: -y, np.array([1.0]), (0,))
    ts, ys = integrate_rk4(sys, 1.0, h=0.01)
    assert ts[-1] == pytest.approx(1.0)
    assert ys[-1, 0] == pytest.approx(math.exp(-1), abs=1e-8)


def test_rk4_balls_system_at_two():
    sys = balls_system(4)
    ts, ys = integrate_rk4(sys, 2.0, h=1e-3)
    for j, k in enumerate(sys.ks):
        assert abs(ys[-1, j] - balls_x(k, 2.0)) <= 1e-6


def test_rk4_components_system_at_one():
    sys = components_system(4)
    ts, ys = integrate_rk4(sys, 1.0, h=1e-3)
    for j, k in enumerate(sys.ks):
        assert abs(ys[-1, j] - components_y(k, 1.0)) <= 1e-6


@pytest.mark.parametrize("K", [1, 2, 4, 6])
def test_rk4_agrees_with_closed_forms_on_whole_interval(K):
    for sys, f in ((balls_system(K), balls_x), (components_system(K), components_y)):
        ts, ys = integrate_rk4(sys, 3.0, h=1e-3)
        ref = np.array([[f(k, t) for k in sys.ks] for t in ts])
        assert np.max(np.abs(ys - ref)) <= 1e-6


def test_rk4_is_deterministic_and_lands_on_t_end():
    a = integrate_rk4(balls_system(3), 0.1234, h=0.01)
    b = integrate_rk4(balls_system(3), 0.1234, h=0.01)
    assert np.array_equal(a[1], b[1])
    assert a[0][-1] == 0.1234
    assert integrate_rk4(balls_system(3), 0.0)[1].shape == (1, 4)


def test_rk4_errors():
    with pytest.raises(ParameterError):
        integrate_rk4(balls_system(2), 1.0, h=0.0)
    with pytest.raises(ParameterError):
        integrate_rk4(balls_system(2), -1.0)
    blowup = OdeSystem("blowup", lambda t, y: y * y, np.array([1e200]), (0,))
    with np.errstate(over="ignore"), pytest.raises(IntegrationError):
        integrate_rk4(blowup, 1.0, h=0.1)


# --- derivative consistency --------------------------------------------------


@pytest.mark.parametrize("k", range(0, 7))
def test_balls_derivative_matches_system(k):
    for t in GRID:
        prev = balls_x(k - 1, t) if k > 0 else 0.0
        assert abs(balls_x_prime(k, t) - (-balls_x(k, t) + prev)) <= 1e-12


@pytest.mark.parametrize("k", range(1, 7))
def test_components_derivative_matches_system(k):
    for t in GRID:
        rhs = -2 * k * components_y(k, t) + sum(
            j * (k - j) * components_y(j, t) * components_y(k - j, t) for j in range(1, k)
        )
        assert abs(components_y_prime(k, t) - rhs) <= 1e-10


@pytest.mark.parametrize("k", range(1, 21))
def test_balls_maximum_at_t_equals_k(k):
    peak = balls_x(k, float(k))
    assert peak < 0.5
    ts = np.linspace(0, 4 * k + 10, 4001)
    assert max(balls_x(k, t) for t in ts) <= peak + 1e-15
    assert balls_x(k, k - 1e-3) < peak and balls_x(k, k + 1e-3) < peak


# --- envelope horizon ----------------------------------------------------------


@pytest.mark.parametrize("n", [1e4, 1e6, 1e9])
def test_x0_dominates_basic_eps_up_to_horizon(n):
    # eps/x_0 = n^(-1/3) e^(4t) stays below n^(-4 alpha) on the horizon
    alpha = 0.01
    horizon = (1 / 12 - alpha) * math.log(n)
    for t in np.linspace(0, horizon, 200):
        assert eps_bb_basic(n, t) / balls_x(0, t) <= n ** (-4 * alpha) * (1 + 1e-12)


@pytest.mark.parametrize("n", [1e40, 1e60, 1e100])
@pytest.mark.parametrize("kappa", [1, 2, 3, 4])
def test_x_kappa_dominates_basic_eps_for_large_n(n, kappa):
    alpha = 0.01
    horizon = (1 / 12 - alpha) * math.log(n)
    for t in np.linspace(1.0, horizon, 200):
        assert balls_x(kappa, t) > eps_bb_basic(n, t)


# --- identity and Taylor residual ---------------------------------------------


@pytest.mark.parametrize("k,expected", [(1, (0, 0)), (3, (12, 12)), (4, (96, 96))])
def test_tree_identity_examples(k, expected):
    assert verify_tree_identity(k) == expected


def test_tree_identity_holds_up_to_twenty():
    for k in range(1, 21):
        lhs, rhs = verify_tree_identity(k)
        assert lhs == rhs and isinstance(lhs, int)


@pytest.mark.parametrize("k", [0, 21])
def test_tree_identity_range(k):
    with pytest.raises(ParameterError):
        verify_tree_identity(k)


def test_taylor_residual_examples():
    r = taylor_residual(lambda t: math.exp(-t), lambda t: -math.exp(-t), 0.0, 1000)
    assert r <= 1 / 2000
    assert taylor_residual(lambda t: 2 * t, lambda t: 2.0, 0.7, 1000) <= 1e-12


@given(st.floats(1e3, 1e9), st.floats(0, 1))
def test_taylor_residual_of_basic_eps(n, frac):
    t = frac * math.log(n) / 9
    eps = lambda u: eps_bb_basic(n, u)  # noqa: E731
    r = taylor_residual(eps, lambda u: 3 * eps(u), t, n)
    # each eps evaluation carries a few ulps; the difference quotient scales that by n
    rounding = 16 * n * eps(t) * 2.0**-52
    assert r <= 9 * eps(t) / (2 * n) * math.exp(3 / n) + rounding
    assert n * (eps(t + 1 / n) - eps(t)) <= 3 + 10 * n ** (-1 / 3)
