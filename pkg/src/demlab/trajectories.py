"""Closed-form trajectories, error functions, the trajectory ODE systems with a
fixed-step RK4 integrator, the tree-counting identity and Taylor residuals."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from numba import njit

from .errors import DomainError, IntegrationError, ParameterError

EXACT_K_MAX = 20

# 1/k! and k^(k-2)/k! for k <= 20, correctly rounded from exact rationals
_INV_FACT = np.array([float(Fraction(1, math.factorial(k))) for k in range(EXACT_K_MAX + 1)])
_TREE_COEF = np.array(
    [0.0] + [float(Fraction(k) ** (k - 2) / math.factorial(k)) for k in range(1, EXACT_K_MAX + 1)]
)


# ---------------------------------------------------------------------------
# compiled evaluators (shared with the process kernels)


@njit(cache=True, nogil=True)
def balls_x(k, t):
    """t^k e^-t / k!"""
    if k == 0:
        return math.exp(-t)
    if t == 0.0:
        return 0.0
    if k <= EXACT_K_MAX:
        return t**k * math.exp(-t) * _INV_FACT[k]
    return math.exp(k * math.log(t) - t - math.lgamma(k + 1.0))


@njit(cache=True, nogil=True)
def balls_x_prime(k, t):
    """Derivative of the closed form, (k t^(k-1) - t^k) e^-t / k!."""
    if k == 0:
        return -math.exp(-t)
    if k == 1:
        return (1.0 - t) * math.exp(-t)
    if t == 0.0:
        return 0.0
    return (k - t) * balls_x(k - 1, t) / k


@njit(cache=True, nogil=True)
def components_y(k, t):
    """(k^(k-2)/k!) (2t)^(k-1) e^(-2kt)"""
    if k == 1:
        return math.exp(-2.0 * t)
    if t == 0.0:
        return 0.0
    if k <= EXACT_K_MAX:
        return _TREE_COEF[k] * (2.0 * t) ** (k - 1) * math.exp(-2.0 * k * t)
    return math.exp(
        (k - 2) * math.log(k) - math.lgamma(k + 1.0) + (k - 1) * math.log(2.0 * t) - 2.0 * k * t
    )


@njit(cache=True, nogil=True)
def components_y_prime(k, t):
    if k == 1:
        return -2.0 * math.exp(-2.0 * t)
    if t == 0.0:
        return 1.0 if k == 2 else 0.0
    # y_k * ((k-1)/t - 2k)
    return components_y(k, t) * ((k - 1) / t - 2.0 * k)


@njit(cache=True, nogil=True)
def eps_bb_basic(n, t):
    return n ** (-1.0 / 3.0) * math.exp(3.0 * t)


@njit(cache=True, nogil=True)
def eps_bb_selfcorrect(n, alpha, t):
    return n ** (-0.5 + 0.5 * alpha) * (1.0 + t)


@njit(cache=True, nogil=True)
def delta_bb_selfcorrect(n, alpha, t):
    return n ** (-0.5 + 0.5 * alpha) * (0.5 + t)


@njit(cache=True, nogil=True)
def eps_components(n, kappa, t):
    return n ** (-1.0 / 3.0) * math.exp(6.0 * kappa**3 * t)


@njit(cache=True, nogil=True)
def matching_p(t):
    return 1.0 - 2.0 * t


@njit(cache=True, nogil=True)
def eps_matching(s, t):
    p = 1.0 - 2.0 * t
    if p <= 0.0:
        return math.inf
    return s / (p * p * p * p)


# ---------------------------------------------------------------------------
# checked public evaluators


def eval_balls_trajectory(k: int, t: float) -> float:
    if k < 0:
        raise DomainError("k must be >= 0")
    if t < 0:
        raise DomainError("t must be >= 0")
    return balls_x(int(k), float(t))


def eval_components_trajectory(k: int, t: float) -> float:
    if k < 1:
        raise DomainError("component order k must be >= 1")
    if t < 0:
        raise DomainError("t must be >= 0")
    return components_y(int(k), float(t))


def eval_matching_trajectory(d: int, t: float) -> float:
    if not 0.0 <= t <= 0.5:
        raise DomainError("matching time must lie in [0, 1/2]")
    return d * (1.0 - 2.0 * t)


@dataclass(frozen=True)
class ClosedFormFamily:
    family: str  # "balls" | "components" | "matching-degree"
    d: int = 0

    def __post_init__(self):
        if self.family not in ("balls", "components", "matching-degree"):
            raise ParameterError(f"unknown family {self.family!r}")

    def __call__(self, k: int, t: float) -> float:
        if self.family == "balls":
            return eval_balls_trajectory(k, t)
        if self.family == "components":
            return eval_components_trajectory(k, t)
        return eval_matching_trajectory(self.d, t)

    def curve(self, k: int) -> Callable[[float], float]:
        return lambda t: self(k, t)


ERROR_VARIANTS = ("bb-basic", "bb-selfcorrect", "components", "matching")


@dataclass(frozen=True)
class ErrorFunctionSpec:
    variant: str
    n: int = 1
    alpha: float = 0.1
    kappa: int = 4
    s: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.variant not in ERROR_VARIANTS:
            raise ParameterError(f"unknown error-function variant {self.variant!r}")
        if self.n < 1:
            raise ParameterError("n must be positive")
        if self.variant == "bb-selfcorrect" and not 0 < self.alpha < 0.5:
            raise ParameterError("alpha must lie in (0, 1/2)")

    @property
    def has_delta(self) -> bool:
        return self.variant == "bb-selfcorrect"

    def epsilon(self, t: float) -> float:
        return eval_error(self, t)[0]

    def delta(self, t: float) -> float:
        d = eval_error(self, t)[1]
        if d is None:
            raise ParameterError(f"variant {self.variant} has no delta")
        return d


def eval_error(spec: ErrorFunctionSpec, t: float) -> tuple[float, Optional[float]]:
    v = spec.variant
    if v == "bb-basic":
        return eps_bb_basic(float(spec.n), t), None
    if v == "bb-selfcorrect":
        n, a = float(spec.n), float(spec.alpha)
        return eps_bb_selfcorrect(n, a, t), delta_bb_selfcorrect(n, a, t)
    if v == "components":
        return eps_components(float(spec.n), float(spec.kappa), t), None
    p = 1.0 - 2.0 * t
    if p <= 0.0:
        raise DomainError(f"matching error function undefined at p={p}")
    return spec.s * p**-4, None


# ---------------------------------------------------------------------------
# ODE systems


@dataclass(frozen=True)
class OdeSystem:
    name: str
    rhs: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    ks: tuple[int, ...]  # the index k carried by each coordinate

    @property
    def dim(self) -> int:
        return len(self.y0)


def balls_system(kappa: int) -> OdeSystem:
    """x_k' = -x_k + x_{k-1}, x_{-1} = 0, for 0 <= k <= kappa."""

    def rhs(t, x):
        out = -x.copy()
        out[1:] += x[:-1]
        return out

    y0 = np.zeros(kappa + 1)
    y0[0] = 1.0
    return OdeSystem("balls", rhs, y0, tuple(range(kappa + 1)))


def components_system(kappa: int) -> OdeSystem:
    """y_k' = -2k y_k + sum_{j<k} j(k-j) y_j y_{k-j}, for 1 <= k <= kappa."""
    ks = np.arange(1, kappa + 1, dtype=float)

    def rhs(t, y):
        jy = ks * y
        # conv[k-2] = sum_{j=1}^{k-1} (j y_j)((k-j) y_{k-j})
        conv = np.convolve(jy, jy)
        out = -2.0 * ks * y
        out[1:] += conv[: kappa - 1]
        return out

    y0 = np.zeros(kappa)
    y0[0] = 1.0
    return OdeSystem("components", rhs, y0, tuple(range(1, kappa + 1)))


def integrate_rk4(system: OdeSystem, t_end: float, h: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step RK4. Returns ``(ts, ys)`` with ``ts[j] = j*h``;
    a shorter final step lands exactly on ``t_end``."""
    if not h > 0:
        raise ParameterError("step size must be positive")
    if t_end < 0:
        raise ParameterError("t_end must be >= 0")
    steps = int(math.ceil(t_end / h - 1e-9))
    ts = np.empty(steps + 1)
    ys = np.empty((steps + 1, system.dim))
    y = np.array(system.y0, dtype=float)
    ts[0], ys[0] = 0.0, y
    f = system.rhs
    t = 0.0
    for j in range(1, steps + 1):
        t_next = min(j * h, t_end)
        dt = t_next - t
        k1 = f(t, y)
        k2 = f(t + dt / 2, y + dt / 2 * k1)
        k3 = f(t + dt / 2, y + dt / 2 * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t={t_next}")
        t = t_next
        ts[j], ys[j] = t, y
    return ts, ys


# ---------------------------------------------------------------------------
# identities and Taylor checks


def verify_tree_identity(k: int) -> tuple[int, int]:
    """Both sides of sum_j C(k,j) j^(j-1) (k-j)^(k-j-1) = 2(k-1) k^(k-2), exactly."""
    if not 1 <= k <= EXACT_K_MAX:
        raise ParameterError(f"exact identity check supports 1 <= k <= {EXACT_K_MAX}")
    lhs = sum(math.comb(k, j) * j ** (j - 1) * (k - j) ** (k - j - 1) for j in range(1, k))
    rhs = 0 if k == 1 else 2 * (k - 1) * k ** (k - 2)
    return lhs, rhs


def taylor_residual(
    f: Callable[[float], float], f_prime: Callable[[float], float], t: float, n: float
) -> float:
    """|n (f(t + 1/n) - f(t)) - f'(t)|, at most max|f''|/(2n) on [t, t+1/n]."""
    return abs(n * (f(t + 1.0 / n) - f(t)) - f_prime(t))
