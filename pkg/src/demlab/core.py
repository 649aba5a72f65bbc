"""Process-agnostic machinery: clock, seeding, tracked series, envelopes,
the frozen super/submartingale transform and the good-event monitors.

The scalar update rules are numba-compiled so that the process kernels in
``balls_bins``, ``er_components`` and ``greedy_matching`` call exactly the
same code as the Python-level objects below.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

from .errors import ConfigurationError, ParameterError

MASK64 = (1 << 64) - 1

# ---------------------------------------------------------------------------
# seeding


def splitmix64_mix(z: int) -> int:
    """Finalizer of splitmix64 (Steele, Lea, Flood 2014), on Python ints."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, r: int) -> int:
    """Seed of replica ``r``: ``splitmix64_mix(base XOR r)``.

    The mix is a bijection of 64-bit words, so distinct ``r`` always give
    distinct seeds for a fixed base.
    """
    if base < 0 or base > MASK64 or r < 0 or r > MASK64:
        raise ParameterError("base seed and replica index must be 64-bit unsigned")
    return splitmix64_mix(base ^ r)


def make_rng(seed: int) -> np.random.Generator:
    """The one PRNG used by every process: PCG64 seeded with a 64-bit word."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class SeedPlan:
    base: int
    replicas: int
    start: int = 0  # index of the first replica; lets sub-ensembles share seeds

    def __post_init__(self):
        if self.replicas < 1:
            raise ParameterError("replica count must be >= 1")
        if self.start < 0:
            raise ParameterError("replica start index must be >= 0")
        derive_seed(self.base, 0)

    def indices(self) -> range:
        return range(self.start, self.start + self.replicas)

    def seeds(self) -> list[int]:
        return [derive_seed(self.base, r) for r in self.indices()]


# ---------------------------------------------------------------------------
# clock


@dataclass(frozen=True)
class SimClock:
    i: int
    n: int
    horizon: Optional[int] = None

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("scale n must be positive")
        if self.i < 0:
            raise ParameterError("step must be non-negative")
        if self.horizon is not None and self.i > self.horizon:
            raise ConfigurationError(f"step {self.i} beyond horizon {self.horizon}")

    @property
    def t(self) -> float:
        return self.i / self.n


def advance_clock(clock: SimClock) -> SimClock:
    if clock.horizon is not None and clock.i >= clock.horizon:
        raise ConfigurationError(f"horizon {clock.horizon} exceeded")
    return SimClock(clock.i + 1, clock.n, clock.horizon)


# ---------------------------------------------------------------------------
# shared scalar kernels


@njit(cache=True, nogil=True)
def transform_update(prev, frozen, good_prev, value, scale, traj, eps, sign):
    """One step of the frozen transform; returns (new value, frozen flag)."""
    if good_prev and not frozen:
        return value - scale * (traj + sign * eps), False
    return prev, True


@njit(cache=True, nogil=True)
def envelope_exceedance(value, scale, traj, eps):
    """0 inside ``scale*(traj -/+ eps)``, otherwise the signed overshoot."""
    hi = scale * (traj + eps)
    lo = scale * (traj - eps)
    if value > hi:
        return value - hi
    if value < lo:
        return value - lo
    return 0.0


@njit(cache=True, nogil=True)
def critical_update(entry, below, value, scale, traj, delta, eps, step):
    """Critical-interval bookkeeping; returns (entry step or -1, below flag).

    ``below`` records that the previous observation was strictly under
    ``scale*(traj+delta)``; an entry is only registered right after such an
    observation, so step 0 can never be an entry.
    """
    lo = scale * (traj + delta)
    hi = scale * (traj + eps)
    if value < lo:
        return -1, True
    if value <= hi:
        if entry < 0 and below:
            return step, False
        return entry, False
    return entry, False


# ---------------------------------------------------------------------------
# series, envelopes, transforms


@dataclass
class TrackedSeries:
    """Per-step values of one tracked variable (and optionally its drift)."""

    var_id: str
    values: list[float] = field(default_factory=list)
    drift: list[Optional[float]] = field(default_factory=list)

    def record(self, value: float, drift: Optional[float] = None) -> None:
        self.values.append(float(value))
        self.drift.append(drift)

    @property
    def step(self) -> int:
        return len(self.values) - 1

    def current(self) -> float:
        if not self.values:
            raise ConfigurationError(f"series {self.var_id} is empty")
        return self.values[-1]


@dataclass(frozen=True)
class Envelope:
    """Error band ``scale*(x(t) -/+ eps(t))`` with optional inner ``delta``."""

    epsilon: Callable[[float], float]
    delta: Optional[Callable[[float], float]] = None
    scale: float = 1.0

    def bounds(self, traj: float, t: float) -> tuple[float, float]:
        e = self.epsilon(t)
        return self.scale * (traj - e), self.scale * (traj + e)

    def validate(self, t_max: float, points: int = 1000) -> None:
        if self.delta is None:
            return
        for t in np.linspace(0.0, t_max, max(points, 1000)):
            d, e = self.delta(t), self.epsilon(t)
            if not (0.0 < d <= e):
                raise ConfigurationError(f"need 0 < delta <= eps, got delta={d}, eps={e} at t={t}")


@dataclass
class MartingaleTransform:
    """``X(i) - scale*(x(t_i) +/- eps(t_i))`` frozen once the good event fails."""

    sign: int
    series_id: str
    trajectory: Callable[[float], float]
    envelope: Envelope
    values: list[float] = field(default_factory=list)
    frozen_at: Optional[int] = None

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ParameterError("sign must be +1 or -1")

    def start(self, x0: float, clock: SimClock) -> "MartingaleTransform":
        t = clock.t
        self.values = [x0 - self.envelope.scale * (self.trajectory(t) + self.sign * self.envelope.epsilon(t))]
        self.frozen_at = None
        return self

    @property
    def value(self) -> float:
        return self.values[-1]


def transform_step(
    transform: MartingaleTransform,
    new_value: float,
    clock: SimClock,
    good_event_held_last_step: bool,
) -> MartingaleTransform:
    if not transform.values:
        raise ConfigurationError("transform not started")
    t = clock.t
    frozen = transform.frozen_at is not None
    val, frozen_now = transform_update(
        transform.values[-1],
        frozen,
        good_event_held_last_step,
        float(new_value),
        float(transform.envelope.scale),
        float(transform.trajectory(t)),
        float(transform.envelope.epsilon(t)),
        float(transform.sign),
    )
    if frozen_now and not frozen:
        transform.frozen_at = clock.i
    transform.values.append(val)
    return transform


# ---------------------------------------------------------------------------
# good event and critical interval


@dataclass(frozen=True)
class Violation:
    series_id: str
    exceedance: float


def check_good_event(
    series_set: Sequence[TrackedSeries],
    trajectories: Sequence[Callable[[float], float]],
    envelope: Envelope,
    clock: SimClock,
) -> Optional[Violation]:
    """First series outside its envelope at the current step, or None."""
    if len(series_set) != len(trajectories):
        raise ConfigurationError("one trajectory per series required")
    t = clock.t
    eps = envelope.epsilon(t) if series_set else 0.0
    for series, traj in zip(series_set, trajectories):
        ex = envelope_exceedance(series.current(), float(envelope.scale), float(traj(t)), float(eps))
        if ex != 0.0:
            return Violation(series.var_id, ex)
    return None


@dataclass
class CriticalIntervalMonitor:
    series_id: str
    trajectory: Callable[[float], float]
    envelope: Envelope
    entry: Optional[int] = None
    below: bool = False

    def __post_init__(self):
        if self.envelope.delta is None:
            raise ConfigurationError("critical interval needs an envelope with delta")

    @property
    def inside(self) -> bool:
        return self.entry is not None


def monitor_critical_interval(
    monitor: CriticalIntervalMonitor, value: float, clock: SimClock
) -> CriticalIntervalMonitor:
    t = clock.t
    env = monitor.envelope
    entry, below = critical_update(
        -1 if monitor.entry is None else monitor.entry,
        monitor.below,
        float(value),
        float(env.scale),
        float(monitor.trajectory(t)),
        float(env.delta(t)),
        float(env.epsilon(t)),
        clock.i,
    )
    monitor.entry = None if entry < 0 else int(entry)
    monitor.below = bool(below)
    return monitor


# ---------------------------------------------------------------------------
# recorded traces (the shape every process run hands to the harness)


@dataclass
class TraceSet:
    """Strided record of several tracked variables against their envelopes.

    ``values``, ``traj``, ``lo`` and ``hi`` have shape (recorded steps, vars);
    ``traj``/``lo``/``hi`` are already multiplied by the envelope scale.
    """

    var_ids: list[str]
    steps: np.ndarray
    n: int
    values: np.ndarray
    traj: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return self.steps / self.n

    def series(self, var_id: str) -> TrackedSeries:
        j = self.var_ids.index(var_id)
        return TrackedSeries(var_id, [float(v) for v in self.values[:, j]], [None] * len(self.steps))


def recorded_steps(m: int, stride: int) -> np.ndarray:
    """Steps 0, stride, 2*stride, ... plus the final step m."""
    if stride < 1:
        raise ParameterError("stride must be >= 1")
    steps = np.arange(0, m + 1, stride, dtype=np.int64)
    if steps[-1] != m:
        steps = np.append(steps, np.int64(m))
    return steps
