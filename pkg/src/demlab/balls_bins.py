"""Balls into bins: exact occupancy histogram, exact drift, envelope runs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from numba import njit

from .core import (
    TraceSet,
    critical_update,
    envelope_exceedance,
    make_rng,
    recorded_steps,
    transform_update,
)
from .errors import ParameterError
from .trajectories import balls_x, delta_bb_selfcorrect, eps_bb_basic, eps_bb_selfcorrect

BASIC, SELFCORRECT = 0, 1
ENVELOPES = {"basic": BASIC, "selfcorrect": SELFCORRECT}

# |dX_k^+-| <= |dX_k| + |n dx_k| + |n d eps| <= 1 + 1 + 3 + O(n^-1/3) on the basic horizon
INCREMENT_BOUND = 6.0


@dataclass
class BallsBinsState:
    n: int
    loads: np.ndarray
    hist: np.ndarray  # hist[l] = X_l, number of bins holding exactly l balls
    rng: np.random.Generator
    i: int = 0
    max_load: int = 0

    def X(self, k: int) -> int:
        if k < 0 or k >= len(self.hist):
            return 0
        return int(self.hist[k])

    def histogram(self) -> dict[int, int]:
        return {l: int(c) for l, c in enumerate(self.hist) if c}

    def check_invariants(self) -> None:
        if self.hist.sum() != self.n:
            raise AssertionError("sum_l X_l != n")
        if (np.arange(len(self.hist)) * self.hist).sum() != self.i:
            raise AssertionError("sum_l l X_l != i")
        if (self.hist < 0).any():
            raise AssertionError("negative histogram entry")
        recount = np.bincount(self.loads, minlength=len(self.hist))
        if not np.array_equal(recount[: len(self.hist)], self.hist) or len(recount) > len(self.hist):
            raise AssertionError("histogram disagrees with per-bin loads")


def bb_init(n: int, seed: int = 0) -> BallsBinsState:
    if n < 1:
        raise ParameterError("need at least one bin")
    hist = np.zeros(8, dtype=np.int64)
    hist[0] = n
    return BallsBinsState(n=n, loads=np.zeros(n, dtype=np.int64), hist=hist, rng=make_rng(seed))


@njit(cache=True, nogil=True)
def _place_ball(loads, hist, rng, n):
    b = rng.integers(0, n)
    l = loads[b]
    loads[b] = l + 1
    hist[l] -= 1
    hist[l + 1] += 1
    return l


def bb_step(state: BallsBinsState) -> BallsBinsState:
    if state.max_load + 1 >= len(state.hist):
        grown = np.zeros(2 * len(state.hist), dtype=np.int64)
        grown[: len(state.hist)] = state.hist
        state.hist = grown
    l = _place_ball(state.loads, state.hist, state.rng, state.n)
    state.i += 1
    state.max_load = max(state.max_load, l + 1)
    return state


def bb_exact_drift(state: BallsBinsState, k: int) -> float:
    """E[X_k(i+1) - X_k(i) | state] = (X_{k-1} - X_k)/n, with X_{-1} = 0."""
    if k < 0:
        raise ParameterError("k must be >= 0")
    return (state.X(k - 1) - state.X(k)) / state.n


def horizon(n: int, envelope: str, alpha: float = 0.1) -> int:
    """Largest admissible m: floor(n log n / 9) (basic) or floor((1/2-alpha) n log n)."""
    if envelope == "basic":
        return math.floor(n * math.log(n) / 9.0)
    if envelope == "selfcorrect":
        return math.floor((0.5 - alpha) * n * math.log(n))
    raise ParameterError(f"unknown envelope {envelope!r}")


@njit(cache=True, nogil=True)
def _eps(variant, n, alpha, t):
    if variant == 0:
        return eps_bb_basic(n, t)
    return eps_bb_selfcorrect(n, alpha, t)


@njit(cache=True, nogil=True)
def _run_kernel(
    n, m, kappa, variant, alpha, rng, rec_steps, check_drift,
    loads, hist,
    rec_X, rec_plus, rec_minus, rec_drift,
    plus0, minus0, plus, minus,
    max_plus_drift, min_minus_drift, max_inc,
    crit_j, crit_lam, crit_exc, crit_count,
    scal,
):
    K = kappa + 1
    nf = float(n)
    traj = np.empty(K)
    nxt = np.empty(K)
    for k in range(K):
        traj[k] = balls_x(k, 0.0)
    eps = _eps(variant, nf, alpha, 0.0)

    # step 0
    good = True
    max_ratio = 0.0
    first_viol = -1
    viol_k = -1
    viol_ex = 0.0
    for k in range(K):
        x = float(hist[k])
        plus[k] = x - nf * (traj[k] + eps)
        minus[k] = x - nf * (traj[k] - eps)
        plus0[k] = plus[k]
        minus0[k] = minus[k]
        ex = envelope_exceedance(x, nf, traj[k], eps)
        if ex != 0.0 and good:
            good = False
            first_viol, viol_k, viol_ex = 0, k, ex
        r = abs(x - nf * traj[k]) / (nf * eps)
        if r > max_ratio:
            max_ratio = r

    # critical-interval state per k
    entry = np.full(K, -1, dtype=np.int64)
    below = np.zeros(K, dtype=np.bool_)
    stay_max = np.zeros(K)
    stay_start = np.zeros(K)
    if variant == 1:
        dl = delta_bb_selfcorrect(nf, alpha, 0.0)
        for k in range(K):
            e, b = critical_update(entry[k], below[k], float(hist[k]), nf, traj[k], dl, eps, 0)
            entry[k] = e
            below[k] = b

    rec = 0
    if rec_steps[0] == 0:
        for k in range(K):
            rec_X[0, k] = hist[k]
            rec_plus[0, k] = plus[k]
            rec_minus[0, k] = minus[k]
            rec_drift[0, k] = ((hist[k - 1] if k > 0 else 0) - hist[k]) / nf
        rec = 1

    frozen = False
    frozen_at = -1
    drift_steps = 0
    for i in range(m):
        t1 = (i + 1) / nf
        for k in range(K):
            nxt[k] = balls_x(k, t1)
        eps1 = _eps(variant, nf, alpha, t1)

        # exact drift of the transforms, conditioned on E_i
        if check_drift and good:
            drift_steps += 1
            for k in range(K):
                d = ((hist[k - 1] if k > 0 else 0) - hist[k]) / nf
                dp = d - nf * ((nxt[k] + eps1) - (traj[k] + eps))
                dm = d - nf * ((nxt[k] - eps1) - (traj[k] - eps))
                if dp > max_plus_drift[k]:
                    max_plus_drift[k] = dp
                if dm < min_minus_drift[k]:
                    min_minus_drift[k] = dm

        _place_ball(loads, hist, rng, n)

        for k in range(K):
            x = float(hist[k])
            p_new, fz = transform_update(plus[k], frozen, good, x, nf, nxt[k], eps1, 1.0)
            m_new, fz = transform_update(minus[k], frozen, good, x, nf, nxt[k], eps1, -1.0)
            inc = max(abs(p_new - plus[k]), abs(m_new - minus[k]))
            if inc > max_inc[k]:
                max_inc[k] = inc
            plus[k] = p_new
            minus[k] = m_new
        if not good and not frozen:
            frozen = True
            frozen_at = i + 1

        for k in range(K):
            x = float(hist[k])
            if good:
                ex = envelope_exceedance(x, nf, nxt[k], eps1)
                if ex != 0.0:
                    good = False
                    first_viol, viol_k, viol_ex = i + 1, k, ex
            r = abs(x - nf * nxt[k]) / (nf * eps1)
            if r > max_ratio:
                max_ratio = r

        if variant == 1:
            dl1 = delta_bb_selfcorrect(nf, alpha, t1)
            for k in range(K):
                x = float(hist[k])
                old = entry[k]
                e, b = critical_update(entry[k], below[k], x, nf, nxt[k], dl1, eps1, i + 1)
                gap = x - nf * (nxt[k] + eps1)
                if e >= 0 and old < 0:
                    stay_start[k] = gap
                    stay_max[k] = 0.0
                    c = crit_count[k]
                    if c < crit_j.shape[1]:
                        crit_j[k, c] = i + 1
                        crit_lam[k, c] = nf * (eps1 - dl1)
                        crit_exc[k, c] = 0.0
                    crit_count[k] = c + 1
                elif e >= 0:
                    exc = gap - stay_start[k]
                    if exc > stay_max[k]:
                        stay_max[k] = exc
                        c = crit_count[k] - 1
                        if c < crit_j.shape[1]:
                            crit_exc[k, c] = exc
                entry[k] = e
                below[k] = b

        if rec < rec_steps.shape[0] and rec_steps[rec] == i + 1:
            for k in range(K):
                rec_X[rec, k] = hist[k]
                rec_plus[rec, k] = plus[k]
                rec_minus[rec, k] = minus[k]
                rec_drift[rec, k] = ((hist[k - 1] if k > 0 else 0) - hist[k]) / nf
            rec += 1

        for k in range(K):
            traj[k] = nxt[k]
        eps = eps1

    scal[0] = first_viol
    scal[1] = viol_k
    scal[2] = viol_ex
    scal[3] = frozen_at
    scal[4] = max_ratio
    scal[5] = drift_steps


@dataclass
class CriticalEntry:
    k: int
    step: int
    lam: float  # n (eps(t_j) - delta(t_j)), the deviation Azuma is applied with
    excursion: float  # max over the stay of X^+(i) - X^+(j)


@dataclass
class BallsBinsRun:
    n: int
    m: int
    kappa: int
    envelope: str
    alpha: float
    seed: int
    trace: TraceSet
    plus: np.ndarray  # recorded X_k^+ (steps x k)
    minus: np.ndarray
    drift: np.ndarray  # recorded exact E[dX_k | F_i]
    final_hist: np.ndarray
    first_violation_step: Optional[int]
    violation_var: Optional[str]
    exceedance: float
    frozen_at: Optional[int]
    max_deviation_ratio: float
    plus0: np.ndarray
    minus0: np.ndarray
    plus_final: np.ndarray
    minus_final: np.ndarray
    max_plus_drift: np.ndarray
    min_minus_drift: np.ndarray
    drift_checked_steps: int
    max_increment: np.ndarray
    critical_entries: list[CriticalEntry] = field(default_factory=list)
    critical_entry_counts: Optional[np.ndarray] = None

    @property
    def violated(self) -> bool:
        return self.first_violation_step is not None

    def finals(self) -> dict[str, float]:
        return {v: float(self.trace.values[-1, j]) for j, v in enumerate(self.trace.var_ids)}

    def X(self, k: int) -> int:
        return int(self.final_hist[k]) if k < len(self.final_hist) else 0


def bb_run(
    n: int,
    m: int,
    kappa: int = 4,
    envelope: str = "basic",
    alpha: float = 0.1,
    seed: int = 0,
    stride: int = 1,
    check_drift: bool = True,
    max_critical_entries: int = 4096,
) -> BallsBinsRun:
    """Place m balls, tracking X_0..X_kappa against ``n x_k(t)`` and the envelope."""
    if n < 1:
        raise ParameterError("need at least one bin")
    if kappa < 0:
        raise ParameterError("kappa must be >= 0")
    if m < 0:
        raise ParameterError("m must be >= 0")
    if envelope not in ENVELOPES:
        raise ParameterError(f"unknown envelope {envelope!r}")
    if envelope == "selfcorrect" and not 0 < alpha < 0.5:
        raise ParameterError("alpha must lie in (0, 1/2)")
    limit = horizon(n, envelope, alpha)
    if m > limit:
        raise ParameterError(f"m={m} exceeds the {envelope} horizon {limit}")
    variant = ENVELOPES[envelope]
    state = bb_init(n, seed)
    K = kappa + 1
    hist = np.zeros(m + K + 2, dtype=np.int64)
    hist[0] = n
    steps = recorded_steps(m, stride)
    R = len(steps)
    rec_X = np.zeros((R, K))
    rec_plus = np.zeros((R, K))
    rec_minus = np.zeros((R, K))
    rec_drift = np.zeros((R, K))
    plus0, minus0, plus, minus = (np.zeros(K) for _ in range(4))
    max_plus = np.full(K, -np.inf)
    min_minus = np.full(K, np.inf)
    max_inc = np.zeros(K)
    cap = max(1, min(max_critical_entries, m // 2 + 1))
    crit_j = np.full((K, cap), -1, dtype=np.int64)
    crit_lam = np.zeros((K, cap))
    crit_exc = np.zeros((K, cap))
    crit_count = np.zeros(K, dtype=np.int64)
    scal = np.zeros(6)
    _run_kernel(
        n, m, kappa, variant, float(alpha), state.rng, steps, check_drift,
        state.loads, hist,
        rec_X, rec_plus, rec_minus, rec_drift,
        plus0, minus0, plus, minus,
        max_plus, min_minus, max_inc,
        crit_j, crit_lam, crit_exc, crit_count,
        scal,
    )
    top = int(np.nonzero(hist)[0].max()) + 1
    final_hist = hist[: max(top, K)].copy()

    ts = steps / n
    traj = np.array([[balls_x(k, t) for k in range(K)] for t in ts])
    eps = np.array([_eps(variant, float(n), float(alpha), t) for t in ts])[:, None]
    trace = TraceSet(
        var_ids=[f"X_{k}" for k in range(K)],
        steps=steps,
        n=n,
        values=rec_X,
        traj=n * traj,
        lo=n * (traj - eps),
        hi=n * (traj + eps),
    )
    entries = [
        CriticalEntry(k, int(crit_j[k, c]), float(crit_lam[k, c]), float(crit_exc[k, c]))
        for k in range(K)
        for c in range(min(int(crit_count[k]), cap))
    ]
    fv = int(scal[0])
    fz = int(scal[3])
    return BallsBinsRun(
        n=n, m=m, kappa=kappa, envelope=envelope, alpha=alpha, seed=seed,
        trace=trace, plus=rec_plus, minus=rec_minus, drift=rec_drift,
        final_hist=final_hist,
        first_violation_step=None if fv < 0 else fv,
        violation_var=None if fv < 0 else f"X_{int(scal[1])}",
        exceedance=float(scal[2]),
        frozen_at=None if fz < 0 else fz,
        max_deviation_ratio=float(scal[4]),
        plus0=plus0, minus0=minus0, plus_final=plus, minus_final=minus,
        max_plus_drift=max_plus, min_minus_drift=min_minus,
        drift_checked_steps=int(scal[5]),
        max_increment=max_inc,
        critical_entries=entries,
        critical_entry_counts=crit_count,
    )


def bb_enumerated_drift(state: BallsBinsState, k: int) -> Fraction:
    """E[dX_k] by placing the next ball in each bin in turn and recounting."""
    if k < 0:
        raise ParameterError("k must be >= 0")
    before = int(np.count_nonzero(state.loads == k))
    total = 0
    for b in range(state.n):
        loads = state.loads.copy()
        loads[b] += 1
        total += int(np.count_nonzero(loads == k)) - before
    return Fraction(total, state.n)
