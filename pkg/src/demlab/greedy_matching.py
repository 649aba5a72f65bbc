"""d-regular graph generators and the random greedy matching process with
per-vertex unmatched-degree statistics D_v."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .core import TraceSet, make_rng, recorded_steps
from .errors import GenerationError, ParameterError, ProcessHalted, UndefinedDriftError
from .inequalities import VarianceLedger, accumulate_variance
from .trajectories import eps_matching

SWITCH_BUDGET_FACTOR = 10  # repair gives up after 10*n*d attempted switchings


@dataclass(frozen=True)
class RegularGraph:
    n: int
    d: int
    adj: np.ndarray  # (n, d), each row sorted

    @property
    def edge_count(self) -> int:
        return self.n * self.d // 2

    def edges(self) -> list[tuple[int, int]]:
        return [(u, int(v)) for u in range(self.n) for v in self.adj[u] if u < v]

    def audit(self) -> None:
        """Raise ParameterError unless the graph is simple and d-regular."""
        n, d = self.n, self.d
        if self.adj.shape != (n, d) or (n * d) % 2:
            raise ParameterError("adjacency shape does not match (n, d)")
        problem = _audit_adj(self.adj.astype(np.int64), True)
        if problem:
            raise ParameterError(_AUDIT_MESSAGES[problem])


_AUDIT_MESSAGES = {
    1: "neighbour id out of range",
    2: "graph has a loop",
    3: "repeated or unsorted neighbours",
    4: "adjacency is not symmetric",
}


@njit(cache=True, nogil=True)
def _audit_adj(adj, symmetric):
    n, d = adj.shape
    for u in range(n):
        for j in range(d):
            v = adj[u, j]
            if v < 0 or v >= n:
                return 1
            if v == u:
                return 2
            if j > 0 and adj[u, j - 1] >= v:
                return 3
    if not symmetric:
        return 0
    for u in range(n):
        for j in range(d):
            v = adj[u, j]
            k = _lower_bound(adj, v, u)
            if k >= d or adj[v, k] != u:
                return 4
    return 0


def _check_nd(n: int, d: int) -> None:
    if n < 2 or d < 1:
        raise ParameterError("need n >= 2 and d >= 1")
    if d >= n:
        raise ParameterError("need d < n")
    if (n * d) % 2:
        raise ParameterError("n*d must be even")


def gen_circulant(n: int, d: int) -> RegularGraph:
    """v ~ v +/- 1..floor(d/2) (mod n), plus v + n/2 for odd d."""
    _check_nd(n, d)
    offsets = [o for k in range(1, d // 2 + 1) for o in (k, n - k)]
    if d % 2:
        offsets.append(n // 2)
    base = np.arange(n)[:, None]
    adj = np.sort((base + np.array(offsets)[None, :]) % n, axis=1)
    return RegularGraph(n, d, adj.astype(np.int64))


@njit(cache=True, nogil=True)
def _lower_bound(adj, a, b):
    """First slot in sorted row a holding a value >= b."""
    lo = 0
    hi = adj.shape[1]
    while lo < hi:
        mid = (lo + hi) >> 1
        if adj[a, mid] < b:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True)
def _multiplicity(adj, a, b):
    k = _lower_bound(adj, a, b)
    c = 0
    while k < adj.shape[1] and adj[a, k] == b:
        c += 1
        k += 1
    return c


@njit(cache=True, nogil=True)
def _replace(row, old, new):
    """Swap one copy of old for new in a sorted row, keeping it sorted."""
    k = np.searchsorted(row, old)
    row[k] = new
    while k > 0 and row[k - 1] > row[k]:
        row[k - 1], row[k] = row[k], row[k - 1]
        k -= 1
    while k < row.shape[0] - 1 and row[k + 1] < row[k]:
        row[k + 1], row[k] = row[k], row[k + 1]
        k += 1


@njit(cache=True, nogil=True)
def _pairing_kernel(n, d, pts, rng, budget, per_edge_cap):
    """Pair consecutive shuffled points, then switch away loops and multi-edges.

    Returns (adj, status, attempts) with status 0 = simple, 1 = one bad edge
    found no valid switch within per_edge_cap tries, 2 = budget spent.
    """
    E = n * d // 2
    eu = pts[0::2].copy()
    ev = pts[1::2].copy()
    adj = _adjacency(n, d, eu, ev)  # sorted multigraph rows; a loop shows up twice
    # sequential row scan for loops and repeated neighbours, then one pass over
    # the edges against the (small) sorted list of bad pairs
    bad = []
    for u in range(n):
        for j in range(d):
            v = adj[u, j]
            if u <= v and (v == u or (j > 0 and adj[u, j - 1] == v)):
                bad.append(u * n + v)
    keys = np.unique(np.array(bad, dtype=np.int64))
    queue = []
    if keys.shape[0] > 0:
        for e in range(E):
            a, b = min(eu[e], ev[e]), max(eu[e], ev[e])
            key = a * n + b
            k = np.searchsorted(keys, key)
            if k < keys.shape[0] and keys[k] == key:
                queue.append(e)
    attempts = 0
    while len(queue) > 0:
        e = queue.pop()
        a, b = eu[e], ev[e]
        if a != b and _multiplicity(adj, a, b) == 1:
            continue  # repaired as a side effect of an earlier switch
        done = False
        tries = 0
        while not done:
            if attempts >= budget:
                return adj, 2, attempts
            if tries >= per_edge_cap:
                return adj, 1, attempts
            attempts += 1
            tries += 1
            f = rng.integers(0, E)
            if f == e:
                continue
            c, g = eu[f], ev[f]
            if rng.integers(0, 2) == 1:
                c, g = g, c
            # (a,b),(c,g) -> (a,c),(b,g); both new pairs must be fresh non-loops
            if a == c or b == g or c == g:
                continue
            if _multiplicity(adj, a, c) > 0 or _multiplicity(adj, b, g) > 0:
                continue
            _replace(adj[a], b, c)
            _replace(adj[b], a, g)
            _replace(adj[c], g, a)
            _replace(adj[g], c, b)
            eu[e], ev[e] = a, c
            eu[f], ev[f] = b, g
            done = True
    return adj, 0, attempts


def gen_pairing(n: int, d: int, seed: int = 0) -> RegularGraph:
    """Pairing-model graph made simple by random degree-preserving switchings."""
    _check_nd(n, d)
    rng = make_rng(seed)
    budget = SWITCH_BUDGET_FACTOR * n * d
    cap = n * d // 2 + 8
    while True:
        # a repair can wedge on small dense instances; re-pair from scratch,
        # charging every attempt to the same budget
        pts = np.repeat(np.arange(n, dtype=np.int64), d)
        rng.shuffle(pts)
        adj, status, used = _pairing_kernel(n, d, pts, rng, budget, cap)
        if status == 0:
            break
        budget -= used
        if status == 2 or budget <= 0:
            raise GenerationError(f"switch repair did not converge for n={n}, d={d}")
    # every switch rewrites four rows consistently, so symmetry holds by
    # construction; the cheap per-row audit still runs
    problem = _audit_adj(adj, False)
    if problem:
        raise GenerationError(_AUDIT_MESSAGES[problem])
    return RegularGraph(n, d, adj)


def _from_edge_arrays(n: int, d: int, eu: np.ndarray, ev: np.ndarray) -> RegularGraph:
    deg = np.bincount(np.concatenate([eu, ev]), minlength=n)
    if len(deg) != n or np.any(deg != d):
        raise ParameterError("edge list is not d-regular")
    adj = _adjacency(n, d, eu.astype(np.int64), ev.astype(np.int64))
    # rows built from an edge list are symmetric; loops and repeats still need the audit
    problem = _audit_adj(adj, False)
    if problem:
        raise GenerationError(_AUDIT_MESSAGES[problem])
    return RegularGraph(n, d, adj)


@njit(cache=True, nogil=True)
def _adjacency(n, d, eu, ev):
    adj = np.empty((n, d), dtype=np.int64)
    fill = np.zeros(n, dtype=np.int64)
    for e in range(eu.shape[0]):
        u, v = eu[e], ev[e]
        adj[u, fill[u]] = v
        fill[u] += 1
        adj[v, fill[v]] = u
        fill[v] += 1
    for u in range(n):
        adj[u].sort()
    return adj


def write_graph(graph: RegularGraph, path: str | os.PathLike) -> None:
    lines = [f"{graph.n} {graph.d}"] + [f"{u} {v}" for u, v in graph.edges()]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph(path: str | os.PathLike) -> RegularGraph:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        n, d = int(rows[0][0]), int(rows[0][1])
        pairs = np.array([[int(a), int(b)] for a, b in rows[1:]], dtype=np.int64).reshape(-1, 2)
    except (IndexError, ValueError) as exc:
        raise ParameterError(f"malformed graph file {path}: {exc}") from exc
    _check_nd(n, d)
    if len(pairs) != n * d // 2 or pairs.min(initial=0) < 0 or pairs.max(initial=0) >= n:
        raise ParameterError(f"graph file {path} does not describe a {d}-regular graph on {n} vertices")
    try:
        return _from_edge_arrays(n, d, pairs[:, 0], pairs[:, 1])
    except GenerationError as exc:
        raise ParameterError(f"graph file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# process state


@njit(cache=True)
def _edge_ids(adj):
    n, d = adj.shape
    eid = np.full((n, d), -1, dtype=np.int64)
    E = n * d // 2
    eu = np.empty(E, dtype=np.int64)
    ev = np.empty(E, dtype=np.int64)
    e = 0
    for u in range(n):
        for j in range(d):
            v = adj[u, j]
            if u < v:
                eu[e] = u
                ev[e] = v
                eid[u, j] = e
                eid[v, _lower_bound(adj, v, u)] = e  # rows are sorted
                e += 1
    return eid, eu, ev


@dataclass
class MatchingState:
    graph: RegularGraph
    matched: np.ndarray
    D: np.ndarray
    hist: np.ndarray  # hist[k] = number of vertices with D_v = k
    bounds: np.ndarray  # [dmin, dmax]
    eid: np.ndarray
    eu: np.ndarray
    ev: np.ndarray
    alive: np.ndarray  # alive[:A] are the alive edge ids
    pos: np.ndarray  # pos[e] = index of e in alive, or -1
    A: np.ndarray  # one-element array so compiled code can update it
    rng: np.random.Generator
    M: list[tuple[int, int]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def i(self) -> int:
        return len(self.M)

    @property
    def alive_count(self) -> int:
        return int(self.A[0])

    @property
    def unmatched(self) -> int:
        return self.n - 2 * len(self.M)

    def alive_edges(self) -> list[tuple[int, int]]:
        return sorted((int(self.eu[e]), int(self.ev[e])) for e in self.alive[: self.alive_count])

    def recompute_D(self, v: int) -> int:
        return int(np.count_nonzero(~self.matched[self.graph.adj[v]]))

    def check_invariants(self) -> None:
        seen = set()
        for u, v in self.M:
            if u in seen or v in seen or not (self.matched[u] and self.matched[v]):
                raise AssertionError("M is not a matching")
            seen.update((u, v))
        if int(self.matched.sum()) != 2 * self.i:
            raise AssertionError("matched flags disagree with M")
        for v in range(self.n):
            if self.recompute_D(v) != self.D[v]:
                raise AssertionError(f"D_{v} out of date")
        expect = sorted(
            (u, v) for u, v in self.graph.edges() if not self.matched[u] and not self.matched[v]
        )
        if expect != self.alive_edges():
            raise AssertionError("alive-edge structure out of date")
        if int(self.D[~self.matched].sum()) != 2 * self.alive_count:
            raise AssertionError("handshake identity fails")
        if not np.array_equal(np.bincount(self.D, minlength=len(self.hist)), self.hist):
            raise AssertionError("degree histogram out of date")
        present = np.nonzero(self.hist)[0]
        if self.bounds[0] != present.min() or self.bounds[1] != present.max():
            raise AssertionError("histogram min/max out of date")


def match_init(graph: RegularGraph, seed: int = 0) -> MatchingState:
    n, d = graph.n, graph.d
    eid, eu, ev = _edge_ids(graph.adj)
    E = len(eu)
    hist = np.zeros(d + 1, dtype=np.int64)
    hist[d] = n
    return MatchingState(
        graph=graph,
        matched=np.zeros(n, dtype=np.bool_),
        D=np.full(n, d, dtype=np.int64),
        hist=hist,
        bounds=np.array([d, d], dtype=np.int64),
        eid=eid,
        eu=eu,
        ev=ev,
        alive=np.arange(E, dtype=np.int64),
        pos=np.arange(E, dtype=np.int64),
        A=np.array([E], dtype=np.int64),
        rng=make_rng(seed),
    )


@njit(cache=True, nogil=True)
def _kill_edge(e, alive, pos, A):
    j = pos[e]
    if j < 0:
        return
    last = alive[A[0] - 1]
    alive[j] = last
    pos[last] = j
    pos[e] = -1
    A[0] -= 1


@njit(cache=True, nogil=True)
def _match_vertex(x, adj, eid, matched, D, hist, bounds, alive, pos, A, S, track_S, dec):
    """Flag x matched and update every statistic that depends on it."""
    d = adj.shape[1]
    matched[x] = True
    if track_S:
        for j in range(d):
            S[adj[x, j]] -= D[x]
    for j in range(d):
        y = adj[x, j]
        _kill_edge(eid[x, j], alive, pos, A)
        old = D[y]
        hist[old] -= 1
        hist[old - 1] += 1
        D[y] = old - 1
        dec[y] += 1
        if old - 1 < bounds[0]:
            bounds[0] = old - 1
        if track_S and not matched[y]:
            for jj in range(d):
                z = adj[y, jj]
                if not matched[z]:
                    S[z] -= 1
    while hist[bounds[1]] == 0:
        bounds[1] -= 1


@njit(cache=True, nogil=True)
def _match_edge(e, eu, ev, adj, eid, matched, D, hist, bounds, alive, pos, A, S, track_S, dec):
    """Add alive edge e to the matching; returns the largest |dD_y| of the step."""
    u = eu[e]
    v = ev[e]
    _match_vertex(u, adj, eid, matched, D, hist, bounds, alive, pos, A, S, track_S, dec)
    _match_vertex(v, adj, eid, matched, D, hist, bounds, alive, pos, A, S, track_S, dec)
    d = adj.shape[1]
    worst = 0
    for x in (u, v):
        for j in range(d):
            y = adj[x, j]
            if dec[y] > worst:
                worst = dec[y]
    for x in (u, v):
        for j in range(d):
            dec[adj[x, j]] = 0
    return worst


def match_sample_edge(state: MatchingState) -> tuple[int, int]:
    """The edge the next step would choose, drawn uniformly from the alive set."""
    if state.alive_count == 0:
        raise ProcessHalted("no alive edges")
    e = state.alive[state.rng.integers(0, state.alive_count)]
    return int(state.eu[e]), int(state.ev[e])


def match_step(state: MatchingState) -> MatchingState:
    if state.alive_count == 0:
        raise ProcessHalted("no alive edges")
    e = int(state.alive[state.rng.integers(0, state.alive_count)])
    dummy = np.zeros(1, dtype=np.int64)
    dec = np.zeros(state.n, dtype=np.int64)
    _match_edge(e, state.eu, state.ev, state.graph.adj, state.eid, state.matched, state.D,
                state.hist, state.bounds, state.alive, state.pos, state.A, dummy, False, dec)
    state.M.append((int(state.eu[e]), int(state.ev[e])))
    return state


def match_run_to_halt(state: MatchingState) -> MatchingState:
    while state.alive_count:
        match_step(state)
    return state


# ---------------------------------------------------------------------------
# drifts and variance


def _neighbour_sum(state: MatchingState, v: int) -> int:
    nb = state.graph.adj[v]
    free = nb[~state.matched[nb]]
    return int(state.D[free].sum())


def match_exact_drift(state: MatchingState, v: int) -> float:
    """E[dD_v] = -(sum of D_u over unmatched neighbours u of v) / (alive edges)."""
    return float(match_exact_drift_fraction(state, v))


def match_exact_drift_fraction(state: MatchingState, v: int) -> Fraction:
    A = state.alive_count
    if A == 0:
        raise UndefinedDriftError("drift undefined once no alive edges remain")
    assert 2 * A == int(state.D[~state.matched].sum())
    return Fraction(-_neighbour_sum(state, v), A)


def _edge_classes(state: MatchingState, v: int) -> tuple[int, int, int]:
    """(x0, x1, x2): alive edges with 0, 1 or 2 endpoints among v's unmatched neighbours."""
    nb = state.graph.adj[v]
    inside = np.zeros(state.n, dtype=bool)
    inside[nb[~state.matched[nb]]] = True
    x2 = 0
    for u in np.nonzero(inside)[0]:
        x2 += int(np.count_nonzero(inside[state.graph.adj[u]] & (state.graph.adj[u] > u)))
    x1 = _neighbour_sum(state, v) - 2 * x2
    return state.alive_count - x1 - x2, x1, x2


def increment_bound(n: int, d: int, K: float) -> float:
    """2 + 2d/n + the largest one-step change of eps over the envelope's active range."""
    s, thr, _ = envelope_constants(n, d, K)
    last = _last_active_step(n, thr)
    if last < 0:
        return 2.0 + 2.0 * d / n
    de = eps_matching(s, (last + 1) / n) - eps_matching(s, last / n)
    return 2.0 + 2.0 * d / n + de


def match_variance_step(state: MatchingState, v: int, K: float = 2.0, C: Optional[float] = None) -> float:
    """C * E|dD_v^+| for the current step; E is exact over the three edge classes.

    dD_v^+ = dD_v + 2d/n - d_eps, and dD_v is 0, -1 or -2 on class x0, x1, x2.
    """
    A = state.alive_count
    if A == 0:
        return 0.0
    n, d = state.n, state.graph.d
    if C is None:
        C = increment_bound(n, d, K)
    s, _, _ = envelope_constants(n, d, K)
    i = state.i
    c = 2.0 * d / n - (eps_matching(s, (i + 1) / n) - eps_matching(s, i / n))
    x0, x1, x2 = _edge_classes(state, v)
    return C * (x0 * abs(c) + x1 * abs(c - 1.0) + x2 * abs(c - 2.0)) / A


def envelope_constants(n: int, d: int, K: float) -> tuple[float, float, float]:
    """s = K sqrt(d log n), the active-range cut-off (s/d)^(1/5) on p, and alpha = (s/d)^(1/10)."""
    if not K > 0:
        raise ParameterError("K must be positive")
    s = K * math.sqrt(d * math.log(n))
    return s, (s / d) ** 0.2, (s / d) ** 0.1


def _last_active_step(n: int, thr: float) -> int:
    # largest i with 1 - 2i/n > thr
    i = int(math.floor((1.0 - thr) * n / 2.0))
    while i >= 0 and not 1.0 - 2.0 * i / n > thr:
        i -= 1
    while 1.0 - 2.0 * (i + 1) / n > thr:
        i += 1
    return i


# ---------------------------------------------------------------------------
# full runs


@njit(cache=True, nogil=True)
def _x2_count(v, adj, matched, mark):
    d = adj.shape[1]
    for j in range(d):
        u = adj[v, j]
        if not matched[u]:
            mark[u] = True
    x2 = 0
    for j in range(d):
        u = adj[v, j]
        if mark[u]:
            for jj in range(d):
                w = adj[u, jj]
                if w > u and mark[w]:
                    x2 += 1
    for j in range(d):
        mark[adj[v, j]] = False
    return x2


@njit(cache=True, nogil=True)
def _match_kernel(
    n, d, s, thr, C, rng, rec_steps, check_drift, tracked,
    adj, eid, eu, ev, matched, D, hist, bounds, alive, pos, A,
    rec_vals, rec_plus, rec_minus, rec_at, plus, minus, max_inc, ledger, max_adj_drift,
    m_u, m_v, scal,
):
    nf = float(n)
    T = tracked.shape[0]
    S = np.zeros(n, dtype=np.int64)
    if check_drift:
        for v in range(n):
            S[v] = d * d
    dec = np.zeros(n, dtype=np.int64)
    mark = np.zeros(n, dtype=np.bool_)

    good = True
    first_viol = -1
    viol_side = 0
    viol_ex = 0.0
    max_ratio = 0.0
    max_gap = -math.inf
    max_dD = 0
    checked = 0
    active_steps = 0
    drift_steps = 0
    frozen_at = -1
    rec = 0
    i = 0
    for j in range(T):
        v = tracked[j]
        plus[j] = D[v] - (d + s)
        minus[j] = D[v] - (d - s)
    while True:
        t = i / nf
        p = 1.0 - 2.0 * t
        active = p > thr
        eps = eps_matching(s, t)
        dp = d * p
        if active:
            active_steps += 1
            lo_b = dp - eps
            hi_b = dp + eps
            dev = max(abs(bounds[1] - dp), abs(bounds[0] - dp)) / eps
            if dev > max_ratio:
                max_ratio = dev
            if good:
                if bounds[1] > hi_b:
                    good = False
                    first_viol, viol_side, viol_ex = i, 1, bounds[1] - hi_b
                elif bounds[0] < lo_b:
                    good = False
                    first_viol, viol_side, viol_ex = i, -1, bounds[0] - lo_b
        if (rec < rec_steps.shape[0] and rec_steps[rec] == i) or A[0] == 0:
            rec_at[rec] = i
            rec_vals[rec, 0] = bounds[0]
            rec_vals[rec, 1] = bounds[1]
            for j in range(T):
                rec_vals[rec, 2 + j] = D[tracked[j]]
                rec_plus[rec, j] = plus[j]
                rec_minus[rec, j] = minus[j]
            rec += 1
        if A[0] == 0:
            break

        eps1 = eps_matching(s, (i + 1) / nf)
        dp1 = d * (1.0 - 2.0 * (i + 1) / nf)
        use = active and good
        if use:
            drift_steps += 1
            if check_drift:
                smin = S[0]
                for v in range(1, n):
                    if S[v] < smin:
                        smin = S[v]
                lhs = -smin / A[0]
                rhs = -((dp - eps) * (dp - eps)) / (0.5 * nf * p * (dp + eps))
                if lhs - rhs > max_gap:
                    max_gap = lhs - rhs
                checked += 1
            c = 2.0 * d / nf - (eps1 - eps)
            for j in range(T):
                v = tracked[j]
                sv = 0
                for jj in range(d):
                    u = adj[v, jj]
                    if not matched[u]:
                        sv += D[u]
                x2 = _x2_count(v, adj, matched, mark)
                x1 = sv - 2 * x2
                x0 = A[0] - x1 - x2
                ledger[i, j] = C * (x0 * abs(c) + x1 * abs(c - 1.0) + x2 * abs(c - 2.0)) / A[0]
                adj_drift = -sv / A[0] + 2.0 * d / nf - (eps1 - eps)
                if adj_drift > max_adj_drift[j]:
                    max_adj_drift[j] = adj_drift

        e = alive[rng.integers(0, A[0])]
        m_u[i] = eu[e]
        m_v[i] = ev[e]
        worst = _match_edge(e, eu, ev, adj, eid, matched, D, hist, bounds, alive, pos, A,
                            S, check_drift and active, dec)
        if worst > max_dD:
            max_dD = worst
        if check_drift and active and not (1.0 - 2.0 * (i + 1) / nf > thr):
            check_drift = False  # S no longer needed past the active range

        if use:
            for j in range(T):
                v = tracked[j]
                np_ = D[v] - (dp1 + eps1)
                nm = D[v] - (dp1 - eps1)
                inc = max(abs(np_ - plus[j]), abs(nm - minus[j]))
                if inc > max_inc[j]:
                    max_inc[j] = inc
                plus[j] = np_
                minus[j] = nm
        elif frozen_at < 0 and not good:
            frozen_at = i + 1
        i += 1

    scal[0] = i
    scal[1] = first_viol
    scal[2] = viol_side
    scal[3] = viol_ex
    scal[4] = max_ratio
    scal[5] = max_gap
    scal[6] = max_dD
    scal[7] = checked
    scal[8] = active_steps
    scal[9] = drift_steps
    scal[10] = frozen_at
    scal[11] = rec


@dataclass
class MatchingRun:
    n: int
    d: int
    K: float
    seed: int
    s: float
    alpha: float
    p_cutoff: float
    increment_bound: float
    matching_size: int
    unmatched: int
    matching: np.ndarray  # (size, 2) in the order chosen
    trace: TraceSet
    tracked: list[int]
    plus: np.ndarray
    minus: np.ndarray
    first_violation_step: Optional[int]
    violation_var: Optional[str]
    exceedance: float
    frozen_at: Optional[int]
    max_deviation_ratio: float
    max_drift_gap: float  # max over checked steps of drift - chain bound; <= 0 expected
    drift_checked_steps: int
    active_steps: int
    max_dD: int
    max_increment: np.ndarray
    variance: list[VarianceLedger]
    max_adjusted_drift: np.ndarray  # Taylor-adjusted D_v^+ drift, reported only

    @property
    def violated(self) -> bool:
        return self.first_violation_step is not None

    @property
    def unmatched_fraction(self) -> float:
        return self.unmatched / self.n

    def finals(self) -> dict[str, float]:
        return {v: float(self.trace.values[-1, j]) for j, v in enumerate(self.trace.var_ids)}


def match_run(
    graph: RegularGraph,
    K: float = 2.0,
    seed: int = 0,
    stride: int = 1,
    check_drift: bool = True,
    tracked: Sequence[int] = (0,),
) -> MatchingRun:
    """Run greedy matching to exhaustion, checking the degree envelope on its active range."""
    n, d = graph.n, graph.d
    s, thr, alpha = envelope_constants(n, d, K)
    tracked_arr = np.array(sorted(set(int(v) for v in tracked)), dtype=np.int64)
    if len(tracked_arr) and (tracked_arr.min() < 0 or tracked_arr.max() >= n):
        raise ParameterError("tracked vertex out of range")
    C = increment_bound(n, d, K)
    state = match_init(graph, seed)
    max_steps = n // 2
    steps = recorded_steps(max_steps, stride)
    T = len(tracked_arr)
    rec_vals = np.zeros((len(steps) + 1, 2 + T))
    rec_plus = np.zeros((len(steps) + 1, T))
    rec_minus = np.zeros((len(steps) + 1, T))
    rec_at = np.zeros(len(steps) + 1, dtype=np.int64)
    plus, minus = np.zeros(T), np.zeros(T)
    max_inc = np.zeros(T)
    ledger = np.zeros((max_steps, T))
    max_adj = np.full(T, -np.inf)
    m_u = np.zeros(max_steps, dtype=np.int64)
    m_v = np.zeros(max_steps, dtype=np.int64)
    scal = np.zeros(12)
    _match_kernel(
        n, d, s, thr, C, state.rng, steps, check_drift, tracked_arr,
        graph.adj, state.eid, state.eu, state.ev, state.matched, state.D, state.hist,
        state.bounds, state.alive, state.pos, state.A,
        rec_vals, rec_plus, rec_minus, rec_at, plus, minus, max_inc, ledger, max_adj,
        m_u, m_v, scal,
    )
    size = int(scal[0])
    # the process halts before n/2 steps unless the matching is perfect; the
    # halting step is always recorded, on the stride grid or not
    R = int(scal[11])
    steps = rec_at[:R]
    rec_vals = rec_vals[:R]
    n_active = int(scal[9])
    ts = steps / n
    dp = d * (1.0 - 2.0 * ts)
    with np.errstate(divide="ignore"):
        eps = np.array([eps_matching(s, t) for t in ts])
    cols = 2 + T
    traj = np.repeat(dp[:, None], cols, axis=1)
    lo = traj - eps[:, None]
    hi = traj + eps[:, None]
    var_ids = ["D_min", "D_max"] + [f"D_{v}" for v in tracked_arr.tolist()]
    fv = int(scal[1])
    fz = int(scal[10])
    ledgers = []
    for j in range(T):
        vl = VarianceLedger()
        for x in ledger[:n_active, j]:
            accumulate_variance(vl, float(x))
        ledgers.append(vl)
    return MatchingRun(
        n=n, d=d, K=K, seed=seed, s=s, alpha=alpha, p_cutoff=thr, increment_bound=C,
        matching_size=size, unmatched=n - 2 * size,
        matching=np.stack([m_u[:size], m_v[:size]], axis=1),
        trace=TraceSet(var_ids, steps, n, rec_vals, traj, lo, hi),
        tracked=tracked_arr.tolist(),
        plus=rec_plus[:R], minus=rec_minus[:R],
        first_violation_step=None if fv < 0 else fv,
        violation_var=None if fv < 0 else ("D_max" if scal[2] > 0 else "D_min"),
        exceedance=float(scal[3]),
        frozen_at=None if fz < 0 else fz,
        max_deviation_ratio=float(scal[4]),
        max_drift_gap=float(scal[5]),
        drift_checked_steps=int(scal[7]),
        active_steps=int(scal[8]),
        max_dD=int(scal[6]),
        max_increment=max_inc,
        variance=ledgers,
        max_adjusted_drift=max_adj,
    )


def match_enumerated_drift(state: MatchingState, v: int) -> Fraction:
    """E[dD_v] by applying every alive edge to a copy of the state and recounting D_v."""
    A = state.alive_count
    if A == 0:
        raise UndefinedDriftError("drift undefined once no alive edges remain")
    nb = state.graph.adj[v]
    before = int(np.count_nonzero(~state.matched[nb]))
    total = 0
    for e in state.alive[:A]:
        matched = state.matched.copy()
        matched[state.eu[e]] = matched[state.ev[e]] = True
        total += int(np.count_nonzero(~matched[nb])) - before
    return Fraction(total, A)
