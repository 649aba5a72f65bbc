"""Erdős–Rényi edge process: union-find component sizes, drift formula and
exact small-n drift oracle, envelope runs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np
from numba import njit

from .core import TraceSet, envelope_exceedance, make_rng, recorded_steps, transform_update
from .errors import ParameterError, ProcessExhausted
from .trajectories import components_y, eps_components

KAPPA_MAX = 6
ORACLE_N_MAX = 30


@dataclass
class ComponentState:
    n: int
    parent: np.ndarray
    size: np.ndarray
    Y: np.ndarray  # Y[k] = number of components of order k
    deg: np.ndarray
    head: np.ndarray  # adjacency as singly linked lists in flat arrays
    nxt: np.ndarray
    to: np.ndarray
    rng: np.random.Generator
    i: int = 0
    components: int = 0

    @property
    def max_edges(self) -> int:
        return self.n * (self.n - 1) // 2

    def histogram(self) -> dict[int, int]:
        return {k: int(c) for k, c in enumerate(self.Y) if c}

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for u in range(self.n):
            a = self.head[u]
            while a >= 0:
                v = int(self.to[a])
                if u < v:
                    out.append((u, v))
                a = self.nxt[a]
        return sorted(out)

    def root(self, v: int) -> int:
        return int(_find(self.parent, v))

    def check_invariants(self) -> None:
        ks = np.arange(len(self.Y))
        if (ks * self.Y).sum() != self.n:
            raise AssertionError("sum_k k Y_k != n")
        if self.Y.sum() != self.components:
            raise AssertionError("sum_k Y_k != component count")
        if len(set(self.edges())) != self.i or self.deg.sum() != 2 * self.i:
            raise AssertionError("edge store out of sync")


def _empty_state(n: int, seed: int, capacity: int) -> ComponentState:
    if n < 1:
        raise ParameterError("need at least one vertex")
    Y = np.zeros(n + 1, dtype=np.int64)
    Y[1] = n
    cap = max(2, 2 * capacity)
    return ComponentState(
        n=n,
        parent=np.arange(n, dtype=np.int64),
        size=np.ones(n, dtype=np.int64),
        Y=Y,
        deg=np.zeros(n, dtype=np.int64),
        head=np.full(n, -1, dtype=np.int64),
        nxt=np.full(cap, -1, dtype=np.int64),
        to=np.zeros(cap, dtype=np.int64),
        rng=make_rng(seed),
        components=n,
    )


def er_init(n: int, seed: int = 0) -> ComponentState:
    return _empty_state(n, seed, 16)


# ---------------------------------------------------------------------------
# compiled primitives


@njit(cache=True, nogil=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, nogil=True)
def _adjacent(head, nxt, to, deg, u, v):
    if deg[v] < deg[u]:
        u, v = v, u
    a = head[u]
    while a >= 0:
        if to[a] == v:
            return True
        a = nxt[a]
    return False


@njit(cache=True, nogil=True)
def _sample_missing(rng, n, head, nxt, to, deg):
    """Uniform absent pair by rejection over ordered vertex pairs."""
    while True:
        u = rng.integers(0, n)
        v = rng.integers(0, n)
        if u != v and not _adjacent(head, nxt, to, deg, u, v):
            if u < v:
                return u, v
            return v, u


@njit(cache=True, nogil=True)
def _add_edge(u, v, i, parent, size, Y, deg, head, nxt, to):
    """Insert edge number i; returns True when it merged two components."""
    a = 2 * i
    to[a] = v
    nxt[a] = head[u]
    head[u] = a
    to[a + 1] = u
    nxt[a + 1] = head[v]
    head[v] = a + 1
    deg[u] += 1
    deg[v] += 1
    ru = _find(parent, u)
    rv = _find(parent, v)
    if ru == rv:
        return False
    su = size[ru]
    sv = size[rv]
    Y[su] -= 1
    Y[sv] -= 1
    Y[su + sv] += 1
    if su < sv:
        ru, rv = rv, ru
    parent[rv] = ru
    size[ru] = su + sv
    return True


def er_sample_missing_edge(state: ComponentState) -> tuple[int, int]:
    """Draw (without inserting) the pair the next step would add."""
    if state.i >= state.max_edges:
        raise ProcessExhausted("graph is complete")
    u, v = _sample_missing(state.rng, state.n, state.head, state.nxt, state.to, state.deg)
    return int(u), int(v)


def _ensure_capacity(state: ComponentState) -> None:
    if 2 * state.i + 2 > len(state.to):
        cap = 2 * len(state.to)
        for name in ("nxt", "to"):
            old = getattr(state, name)
            new = np.full(cap, -1, dtype=np.int64)
            new[: len(old)] = old
            setattr(state, name, new)


def _insert(state: ComponentState, u: int, v: int) -> bool:
    _ensure_capacity(state)
    merged = _add_edge(u, v, state.i, state.parent, state.size, state.Y, state.deg,
                       state.head, state.nxt, state.to)
    state.i += 1
    if merged:
        state.components -= 1
    return bool(merged)


def er_step(state: ComponentState) -> ComponentState:
    u, v = er_sample_missing_edge(state)
    _insert(state, u, v)
    return state


def er_from_edges(n: int, edges: Iterable[tuple[int, int]], seed: int = 0) -> ComponentState:
    """State holding exactly the given (0-based) edges."""
    edges = list(edges)
    state = _empty_state(n, seed, len(edges) + 1)
    seen = set()
    for u, v in edges:
        u, v = min(u, v), max(u, v)
        if u == v or not 0 <= u < n or v >= n or (u, v) in seen:
            raise ParameterError(f"bad edge {(u, v)}")
        seen.add((u, v))
        _insert(state, u, v)
    return state


# ---------------------------------------------------------------------------
# drifts


def er_formula_drift(state: ComponentState, k: int) -> float:
    """-2k Y_k/n + sum_{j=1}^{k-1} j(k-j) (Y_j/n)(Y_{k-j}/n), without the O(1/n) term."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    n = state.n
    Y = lambda j: int(state.Y[j]) if j < len(state.Y) else 0  # noqa: E731
    pos = sum(j * (k - j) * Y(j) * Y(k - j) for j in range(1, k))
    return -2.0 * k * Y(k) / n + pos / (n * n)


def er_exact_drift_oracle(state: ComponentState, k: int) -> Fraction:
    """Average of dY_k over every missing edge, as an exact rational."""
    n = state.n
    if n > ORACLE_N_MAX:
        raise ParameterError(f"oracle enumeration limited to n <= {ORACLE_N_MAX}")
    if k < 1:
        raise ParameterError("k must be >= 1")
    missing = state.max_edges - state.i
    if missing == 0:
        raise ProcessExhausted("no missing edges")
    roots = [state.root(v) for v in range(n)]
    sizes = [int(state.size[r]) for r in roots]
    present = set(state.edges())
    total = 0
    count = 0
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) in present:
                continue
            count += 1
            if roots[u] == roots[v]:
                continue
            a, b = sizes[u], sizes[v]
            total += (a + b == k) - (a == k) - (b == k)
    assert count == missing
    return Fraction(total, missing)


# ---------------------------------------------------------------------------
# full runs


@njit(cache=True, nogil=True)
def _er_kernel(
    n, m, kappa, rng, rec_steps, check_drift,
    parent, size, Y, deg, head, nxt, to,
    rec_Y, rec_plus, rec_minus, rec_drift,
    plus0, minus0, plus, minus,
    max_bound_gap, max_plus_chain, min_minus_chain, max_plus_formula, min_minus_formula,
    max_dY, max_inc, scal,
):
    nf = float(n)
    kf = float(kappa)
    traj = np.empty(kappa + 1)
    nx = np.empty(kappa + 1)
    prevY = np.empty(kappa + 1)
    for k in range(1, kappa + 1):
        traj[k] = components_y(k, 0.0)
    eps = eps_components(nf, kf, 0.0)

    good = True
    first_viol = -1
    viol_k = -1
    viol_ex = 0.0
    max_ratio = 0.0
    for k in range(1, kappa + 1):
        x = float(Y[k])
        plus[k - 1] = x - nf * (traj[k] + eps)
        minus[k - 1] = x - nf * (traj[k] - eps)
        plus0[k - 1] = plus[k - 1]
        minus0[k - 1] = minus[k - 1]
        ex = envelope_exceedance(x, nf, traj[k], eps)
        if ex != 0.0 and good:
            good = False
            first_viol, viol_k, viol_ex = 0, k, ex
        r = abs(x - nf * traj[k]) / (nf * eps)
        if r > max_ratio:
            max_ratio = r

    rec = 0
    frozen = False
    frozen_at = -1
    merges = 0
    checked = 0
    chain_checked = 0
    for i in range(m + 1):
        if rec < rec_steps.shape[0] and rec_steps[rec] == i:
            for k in range(1, kappa + 1):
                rec_Y[rec, k - 1] = Y[k]
                rec_plus[rec, k - 1] = plus[k - 1]
                rec_minus[rec, k - 1] = minus[k - 1]
                s = 0.0
                for j in range(1, k):
                    s += j * (k - j) * (Y[j] / nf) * (Y[k - j] / nf)
                rec_drift[rec, k - 1] = -2.0 * k * Y[k] / nf + s
            rec += 1
        if i == m:
            break

        t1 = (i + 1) / nf
        for k in range(1, kappa + 1):
            nx[k] = components_y(k, t1)
        eps1 = eps_components(nf, kf, t1)

        if check_drift and good and math.isfinite(eps1):
            checked += 1
            eps_meaningful = eps <= 1.0
            if eps_meaningful:
                chain_checked += 1
            for k in range(1, kappa + 1):
                pos = 0.0
                up = 0.0
                lo = 0.0
                for j in range(1, k):
                    w = j * (k - j)
                    pos += w * (Y[j] / nf) * (Y[k - j] / nf)
                    up += w * (traj[j] + eps) * (traj[k - j] + eps)
                    lo += w * max(traj[j] - eps, 0.0) * max(traj[k - j] - eps, 0.0)
                f = -2.0 * k * Y[k] / nf + pos
                env_up = -2.0 * k * (traj[k] - eps) + up
                env_lo = -2.0 * k * (traj[k] + eps) + lo
                gap = max(f - env_up, env_lo - f)
                if gap > max_bound_gap[k - 1]:
                    max_bound_gap[k - 1] = gap
                sp = nf * ((nx[k] + eps1) - (traj[k] + eps))
                sm = nf * ((nx[k] - eps1) - (traj[k] - eps))
                if f - sp > max_plus_formula[k - 1]:
                    max_plus_formula[k - 1] = f - sp
                if f - sm < min_minus_formula[k - 1]:
                    min_minus_formula[k - 1] = f - sm
                if eps_meaningful:
                    if env_up - sp > max_plus_chain[k - 1]:
                        max_plus_chain[k - 1] = env_up - sp
                    if env_lo - sm < min_minus_chain[k - 1]:
                        min_minus_chain[k - 1] = env_lo - sm

        for k in range(1, kappa + 1):
            prevY[k] = Y[k]
        u, v = _sample_missing(rng, n, head, nxt, to, deg)
        if _add_edge(u, v, i, parent, size, Y, deg, head, nxt, to):
            merges += 1

        for k in range(1, kappa + 1):
            x = float(Y[k])
            dy = abs(x - prevY[k])
            if dy > max_dY[k - 1]:
                max_dY[k - 1] = dy
            p_new, fz = transform_update(plus[k - 1], frozen, good, x, nf, nx[k], eps1, 1.0)
            m_new, fz = transform_update(minus[k - 1], frozen, good, x, nf, nx[k], eps1, -1.0)
            inc = max(abs(p_new - plus[k - 1]), abs(m_new - minus[k - 1]))
            if eps1 <= 1.0 and inc > max_inc[k - 1]:
                max_inc[k - 1] = inc
            plus[k - 1] = p_new
            minus[k - 1] = m_new
        if not good and not frozen:
            frozen = True
            frozen_at = i + 1

        for k in range(1, kappa + 1):
            x = float(Y[k])
            if good:
                ex = envelope_exceedance(x, nf, nx[k], eps1)
                if ex != 0.0:
                    good = False
                    first_viol, viol_k, viol_ex = i + 1, k, ex
            r = abs(x - nf * nx[k]) / (nf * eps1)
            if r > max_ratio:
                max_ratio = r
            traj[k] = nx[k]
        eps = eps1

    scal[0] = first_viol
    scal[1] = viol_k
    scal[2] = viol_ex
    scal[3] = frozen_at
    scal[4] = max_ratio
    scal[5] = checked
    scal[6] = chain_checked
    scal[7] = merges


@dataclass
class ComponentsRun:
    n: int
    c: float
    m: int
    kappa: int
    seed: int
    trace: TraceSet
    plus: np.ndarray
    minus: np.ndarray
    drift: np.ndarray  # recorded main-term drift of Y_k
    final_Y: np.ndarray
    components: int
    merges: int
    first_violation_step: Optional[int]
    violation_var: Optional[str]
    exceedance: float
    frozen_at: Optional[int]
    max_deviation_ratio: float
    plus0: np.ndarray
    minus0: np.ndarray
    plus_final: np.ndarray
    minus_final: np.ndarray
    max_bound_gap: np.ndarray  # drift formula vs. its envelope bounds; <= 0 expected
    max_plus_chain: np.ndarray  # envelope bound minus n d(y+eps), where eps <= 1
    min_minus_chain: np.ndarray
    max_plus_formula: np.ndarray  # drift formula minus n d(y+eps), reported only
    min_minus_formula: np.ndarray
    drift_checked_steps: int
    chain_checked_steps: int
    max_dY: np.ndarray
    max_increment: np.ndarray  # over steps with eps <= 1 only

    @property
    def violated(self) -> bool:
        return self.first_violation_step is not None

    def finals(self) -> dict[str, float]:
        return {v: float(self.trace.values[-1, j]) for j, v in enumerate(self.trace.var_ids)}


def er_run(
    n: int,
    c: float,
    kappa: int = 4,
    seed: int = 0,
    stride: int = 1,
    check_drift: bool = True,
) -> ComponentsRun:
    """Add floor(c n) uniformly random missing edges, tracking Y_1..Y_kappa."""
    if n < 1:
        raise ParameterError("need at least one vertex")
    if not c > 0:
        raise ParameterError("c must be positive")
    if not 1 <= kappa <= KAPPA_MAX:
        raise ParameterError(f"kappa must lie in [1, {KAPPA_MAX}]")
    m = math.floor(c * n)
    if m > n * (n - 1) // 2:
        raise ParameterError(f"m={m} exceeds C(n,2)")
    state = _empty_state(n, seed, m + 1)
    steps = recorded_steps(m, stride)
    R, K = len(steps), kappa
    rec_Y, rec_plus, rec_minus, rec_drift = (np.zeros((R, K)) for _ in range(4))
    plus0, minus0, plus, minus = (np.zeros(K) for _ in range(4))
    max_gap = np.full(K, -np.inf)
    max_pc = np.full(K, -np.inf)
    min_mc = np.full(K, np.inf)
    max_pf = np.full(K, -np.inf)
    min_mf = np.full(K, np.inf)
    max_dY = np.zeros(K)
    max_inc = np.zeros(K)
    scal = np.zeros(8)
    _er_kernel(
        n, m, kappa, state.rng, steps, check_drift,
        state.parent, state.size, state.Y, state.deg, state.head, state.nxt, state.to,
        rec_Y, rec_plus, rec_minus, rec_drift,
        plus0, minus0, plus, minus,
        max_gap, max_pc, min_mc, max_pf, min_mf,
        max_dY, max_inc, scal,
    )
    ts = steps / n
    traj = np.array([[components_y(k, t) for k in range(1, K + 1)] for t in ts])
    eps = np.array([eps_components(float(n), float(kappa), t) for t in ts])[:, None]
    with np.errstate(over="ignore", invalid="ignore"):
        lo, hi = n * (traj - eps), n * (traj + eps)
    trace = TraceSet([f"Y_{k}" for k in range(1, K + 1)], steps, n, rec_Y, n * traj, lo, hi)
    fv, fz = int(scal[0]), int(scal[3])
    merges = int(scal[7])
    return ComponentsRun(
        n=n, c=c, m=m, kappa=kappa, seed=seed, trace=trace,
        plus=rec_plus, minus=rec_minus, drift=rec_drift,
        final_Y=state.Y.copy(), components=n - merges, merges=merges,
        first_violation_step=None if fv < 0 else fv,
        violation_var=None if fv < 0 else f"Y_{int(scal[1])}",
        exceedance=float(scal[2]),
        frozen_at=None if fz < 0 else fz,
        max_deviation_ratio=float(scal[4]),
        plus0=plus0, minus0=minus0, plus_final=plus, minus_final=minus,
        max_bound_gap=max_gap, max_plus_chain=max_pc, min_minus_chain=min_mc,
        max_plus_formula=max_pf, min_minus_formula=min_mf,
        drift_checked_steps=int(scal[5]), chain_checked_steps=int(scal[6]),
        max_dY=max_dY, max_increment=max_inc,
    )
