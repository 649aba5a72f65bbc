"""Experiment configuration, seeded replica ensembles, aggregation, and all
file output (time series, JSON report, plot data, verification summaries)."""
from __future__ import annotations

import dataclasses
import json
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import balls_bins, er_components, greedy_matching, trajectories
from .core import SeedPlan, TraceSet, derive_seed
from .errors import ConfigurationError, DemLabError, OutputError, ParameterError
from .inequalities import AzumaParams, FreedmanParams, azuma_bound, empirical_tail, freedman_bound

REPORT_VERSION = "dem-lab-report-v1"
PROCESSES = ("balls-bins", "er-components", "matching")
CSV_HEADER = "step,t,var,value,traj,lo,hi"
MAX_RECORDED_ROWS = 2000


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    process: str
    n: int
    m: Optional[int] = None  # balls-bins
    c: Optional[float] = None  # er-components
    d: Optional[int] = None  # matching
    gen: str = "circulant"
    graph: Optional[str] = None
    kappa: int = 4
    envelope: str = "basic"
    alpha: float = 0.1
    K: float = 2.0
    tracked: tuple[int, ...] = (0,)
    seeds: int = 1
    base_seed: int = 0
    seed_start: int = 0
    stride: Optional[int] = None
    check_drift: bool = True
    workers: Optional[int] = None
    out: Optional[str] = None
    plot_var: Optional[str] = None
    max_violation_rate: float = 0.05

    def validate(self) -> "ExperimentConfig":
        if self.process not in PROCESSES:
            raise ConfigurationError(f"unknown process {self.process!r}")
        if self.n is None or self.n < 1:
            raise ConfigurationError("n must be a positive integer")
        if self.stride is not None and self.stride < 1:
            raise ConfigurationError("stride must be >= 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if not 0 <= self.max_violation_rate <= 1:
            raise ConfigurationError("max-violation-rate must lie in [0, 1]")
        self.seed_plan()
        if self.process == "balls-bins":
            if self.m is None:
                raise ConfigurationError("balls-bins needs m")
            if self.m < 0 or self.kappa < 0:
                raise ConfigurationError("m and kappa must be >= 0")
            if self.envelope not in balls_bins.ENVELOPES:
                raise ConfigurationError(f"unknown envelope {self.envelope!r}")
            if self.envelope == "selfcorrect" and not 0 < self.alpha < 0.5:
                raise ConfigurationError("alpha must lie in (0, 1/2)")
            limit = balls_bins.horizon(self.n, self.envelope, self.alpha)
            if self.m > limit:
                raise ConfigurationError(f"m={self.m} exceeds the {self.envelope} horizon {limit}")
        elif self.process == "er-components":
            if self.c is None or not self.c > 0:
                raise ConfigurationError("er-components needs c > 0")
            if not 1 <= self.kappa <= er_components.KAPPA_MAX:
                raise ConfigurationError(f"kappa must lie in [1, {er_components.KAPPA_MAX}]")
            if math.floor(self.c * self.n) > self.n * (self.n - 1) // 2:
                raise ConfigurationError("c*n exceeds the number of vertex pairs")
        else:
            if self.graph is None:
                if self.d is None:
                    raise ConfigurationError("matching needs d or a graph file")
                if self.gen not in ("circulant", "pairing"):
                    raise ConfigurationError(f"unknown generator {self.gen!r}")
                try:
                    greedy_matching._check_nd(self.n, self.d)
                except ParameterError as exc:
                    raise ConfigurationError(str(exc)) from exc
            if not self.K > 0:
                raise ConfigurationError("K must be positive")
            if any(not 0 <= v < self.n for v in self.tracked):
                raise ConfigurationError("tracked vertex out of range")
        return self

    def seed_plan(self) -> SeedPlan:
        try:
            return SeedPlan(self.base_seed, self.seeds, self.seed_start)
        except ParameterError as exc:
            raise ConfigurationError(str(exc)) from exc

    def steps(self) -> int:
        if self.process == "balls-bins":
            return int(self.m)
        if self.process == "er-components":
            return math.floor(self.c * self.n)
        return self.n // 2

    def effective_stride(self) -> int:
        return self.stride or max(1, self.steps() // MAX_RECORDED_ROWS)

    def process_params(self) -> dict[str, Any]:
        """The parameters that define the process (what the report echoes)."""
        p: dict[str, Any] = {"n": self.n}
        if self.process == "balls-bins":
            p.update(m=self.m, kappa=self.kappa, envelope=self.envelope)
            if self.envelope == "selfcorrect":
                p["alpha"] = self.alpha
        elif self.process == "er-components":
            p.update(c=self.c, m=self.steps(), kappa=self.kappa)
        else:
            p.update(d=self.d, gen=None if self.graph else self.gen, graph=self.graph,
                     K=self.K, tracked=list(self.tracked))
        p.update(stride=self.effective_stride(), check_drift=self.check_drift)
        return p


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key: str, raw: Any) -> Any:
    if raw is None or not isinstance(raw, str):
        return raw
    kind = _FIELD_TYPES[key]
    text = raw.strip()
    if text.lower() in ("", "none", "null"):
        return None
    try:
        if "bool" in kind:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if "tuple" in kind:
            return tuple(int(x) for x in text.replace(",", " ").split())
        if "int" in kind:
            return int(text)
        if "float" in kind:
            return float(text)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from exc
    return text


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Flat ``key = value`` pairs, one per line; ``#`` starts a comment."""
    pairs: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key.replace("-", "_")] = value
    return pairs


def build_config(file_values: dict[str, Any], overrides: dict[str, Any]) -> ExperimentConfig:
    """Merge config-file values with command-line values; the command line wins."""
    merged: dict[str, Any] = {}
    for source in (file_values, overrides):
        for key, value in source.items():
            key = key.replace("-", "_")
            if key not in _FIELD_TYPES:
                raise ConfigurationError(f"unknown config key {key!r}")
            if value is not None:
                merged[key] = _coerce(key, value)
    if "process" not in merged or "n" not in merged:
        raise ConfigurationError("config needs at least process and n")
    return ExperimentConfig(**merged).validate()


# ---------------------------------------------------------------------------
# replicas


@dataclass
class ReplicaResult:
    index: int
    seed: int
    finals: dict[str, float] = field(default_factory=dict)
    first_violation_step: Optional[int] = None
    violation_var: Optional[str] = None
    max_deviation_ratio: Optional[float] = None
    matching_size: Optional[int] = None
    unmatched: Optional[int] = None
    transform_start: dict[str, float] = field(default_factory=dict)
    transform_final: dict[str, float] = field(default_factory=dict)
    diagnostics: dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def violated(self) -> bool:
        return self.first_violation_step is not None


def _vec(names: list[str], arr) -> dict[str, float]:
    return {v: float(x) for v, x in zip(names, arr)}


def _balls_replica(cfg: ExperimentConfig, index: int, seed: int, ctx: dict):
    run = balls_bins.bb_run(cfg.n, cfg.m, cfg.kappa, cfg.envelope, cfg.alpha, seed,
                            cfg.effective_stride(), cfg.check_drift)
    names = run.trace.var_ids
    diag = {
        "max_plus_drift": _vec(names, run.max_plus_drift),
        "min_minus_drift": _vec(names, run.min_minus_drift),
        "drift_checked_steps": run.drift_checked_steps,
        "max_increment": _vec(names, run.max_increment),
        "frozen_at": run.frozen_at,
    }
    if cfg.envelope == "selfcorrect":
        diag["critical_entries"] = [int(c) for c in run.critical_entry_counts]
    res = ReplicaResult(
        index, seed, run.finals(), run.first_violation_step, run.violation_var,
        run.max_deviation_ratio,
        transform_start=_vec(names, run.plus0), transform_final=_vec(names, run.plus_final),
        diagnostics=diag,
    )
    return res, run.trace


def _er_replica(cfg: ExperimentConfig, index: int, seed: int, ctx: dict):
    run = er_components.er_run(cfg.n, cfg.c, cfg.kappa, seed, cfg.effective_stride(), cfg.check_drift)
    names = run.trace.var_ids
    diag = {
        "components": run.components,
        "max_bound_gap": _vec(names, run.max_bound_gap),
        "max_plus_chain": _vec(names, run.max_plus_chain),
        "min_minus_chain": _vec(names, run.min_minus_chain),
        "max_plus_formula": _vec(names, run.max_plus_formula),
        "min_minus_formula": _vec(names, run.min_minus_formula),
        "drift_checked_steps": run.drift_checked_steps,
        "chain_checked_steps": run.chain_checked_steps,
        "max_dY": _vec(names, run.max_dY),
        "max_increment": _vec(names, run.max_increment),
        "frozen_at": run.frozen_at,
    }
    res = ReplicaResult(
        index, seed, run.finals(), run.first_violation_step, run.violation_var,
        run.max_deviation_ratio,
        transform_start=_vec(names, run.plus0), transform_final=_vec(names, run.plus_final),
        diagnostics=diag,
    )
    return res, run.trace


def _matching_graph(cfg: ExperimentConfig, seed: int, ctx: dict) -> greedy_matching.RegularGraph:
    if "graph" in ctx:
        return ctx["graph"]
    return greedy_matching.gen_pairing(cfg.n, cfg.d, seed)


def _matching_replica(cfg: ExperimentConfig, index: int, seed: int, ctx: dict):
    graph = _matching_graph(cfg, seed, ctx)
    # the pairing graph consumes the replica seed; the process gets a derived one
    run = greedy_matching.match_run(graph, cfg.K, derive_seed(seed, 1), cfg.effective_stride(),
                                    cfg.check_drift, cfg.tracked)
    tracked = [f"D_{v}" for v in run.tracked]
    diag = {
        "s": run.s,
        "p_cutoff": run.p_cutoff,
        "active_steps": run.active_steps,
        "max_drift_gap": run.max_drift_gap if run.drift_checked_steps else None,
        "drift_checked_steps": run.drift_checked_steps,
        "max_dD": run.max_dD,
        "increment_bound": run.increment_bound,
        "max_increment": _vec(tracked, run.max_increment),
        "variance_total": {v: led.total for v, led in zip(tracked, run.variance)},
        "max_adjusted_drift": _vec(tracked, run.max_adjusted_drift),
        "frozen_at": run.frozen_at,
    }
    start = {v: float(run.plus[0, j]) for j, v in enumerate(tracked)}
    res = ReplicaResult(
        index, seed, run.finals(), run.first_violation_step, run.violation_var,
        run.max_deviation_ratio, run.matching_size, run.unmatched,
        transform_start=start, transform_final=_vec(tracked, run.plus[-1]) if len(tracked) else {},
        diagnostics=diag,
    )
    return res, run.trace


_RUNNERS: dict[str, Callable] = {
    "balls-bins": _balls_replica,
    "er-components": _er_replica,
    "matching": _matching_replica,
}


# ---------------------------------------------------------------------------
# ensembles and reports


@dataclass
class EnsembleReport:
    process: str
    params: dict[str, Any]
    base_seed: int
    seed_start: int
    replicas: list[ReplicaResult]
    aggregate: dict[str, Any]
    tail_bounds: list[dict[str, Any]]
    version: str = REPORT_VERSION

    @property
    def violation_frequency(self) -> float:
        return self.aggregate["violation_frequency"]

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": self.version,
            "process": self.process,
            "params": self.params,
            "base_seed": self.base_seed,
            "seed_start": self.seed_start,
            "replica_count": len(self.replicas),
            "aggregate": self.aggregate,
            "tail_bounds": self.tail_bounds,
            "replicas": [dataclasses.asdict(r) for r in self.replicas],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EnsembleReport":
        if data.get("version") != REPORT_VERSION:
            raise ConfigurationError(f"unsupported report version {data.get('version')!r}")
        return cls(
            process=data["process"],
            params=data["params"],
            base_seed=data["base_seed"],
            seed_start=data["seed_start"],
            replicas=[ReplicaResult(**r) for r in data["replicas"]],
            aggregate=data["aggregate"],
            tail_bounds=data["tail_bounds"],
            version=data["version"],
        )


@dataclass
class Ensemble:
    config: ExperimentConfig
    report: EnsembleReport
    trace: Optional[TraceSet]  # the first replica's recorded trace
    wall_clock: float


def _finite_or_none(x: Optional[float]) -> Optional[float]:
    if x is None or not math.isfinite(x):
        return None
    return float(x)


def _aggregate(cfg: ExperimentConfig, replicas: list[ReplicaResult]) -> dict[str, Any]:
    ok = [r for r in replicas if r.error is None]
    violations = sum(r.violated for r in replicas)
    agg: dict[str, Any] = {
        "violations": violations,
        "violation_frequency": violations / len(replicas),
        "errors": len(replicas) - len(ok),
    }
    if ok:
        names = list(ok[0].finals)
        agg["finals_mean"] = {v: statistics.fmean(r.finals[v] for r in ok) for v in names}
        agg["finals_std"] = {
            v: statistics.stdev(r.finals[v] for r in ok) if len(ok) > 1 else 0.0 for v in names
        }
        agg["max_deviation_ratio"] = max(r.max_deviation_ratio for r in ok)
        if cfg.process == "matching":
            fr = [r.unmatched / cfg.n for r in ok]
            agg["matching_size_mean"] = statistics.fmean(r.matching_size for r in ok)
            agg["unmatched_fraction_mean"] = statistics.fmean(fr)
            agg["unmatched_fraction_max"] = max(fr)
    return agg


def _tail_bounds(cfg: ExperimentConfig, replicas: list[ReplicaResult]) -> list[dict[str, Any]]:
    ok = [r for r in replicas if r.error is None]
    if not ok:
        return []
    out = []
    n = float(cfg.n)
    if cfg.process in ("balls-bins", "er-components"):
        if cfg.process == "balls-bins":
            eps0 = balls_bins._eps(balls_bins.ENVELOPES[cfg.envelope], n, float(cfg.alpha), 0.0)
        else:
            eps0 = trajectories.eps_components(n, float(cfg.kappa), 0.0)
        m = cfg.steps()
        lam = n * eps0
        for var in ok[0].transform_final:
            dev = [r.transform_final[var] - r.transform_start[var] for r in ok]
            if cfg.process == "balls-bins":
                C, c_source = balls_bins.INCREMENT_BOUND, "documented"
            else:
                C = max(r.diagnostics["max_increment"][var] for r in ok)
                c_source = "empirical max increment while eps <= 1"
            bound = azuma_bound(AzumaParams(C, m, lam)) if m > 0 and C > 0 else 1.0
            out.append({
                "var": f"{var}+",
                "inequality": "azuma",
                "C": C,
                "C_source": c_source,
                "m": m,
                "lambda": lam,
                "bound": bound,
                "empirical_frequency": empirical_tail(dev, lam),
                "final_positive_frequency": sum(r.transform_final[var] > 0 for r in ok) / len(ok),
            })
    else:
        s = ok[0].diagnostics["s"]
        C = ok[0].diagnostics["increment_bound"]
        for var in ok[0].transform_final:
            b = max(r.diagnostics["variance_total"][var] for r in ok)
            dev = [r.transform_final[var] - r.transform_start[var] for r in ok]
            out.append({
                "var": f"{var}+",
                "inequality": "freedman",
                "C": C,
                "b": b,
                "lambda": s,
                "bound": freedman_bound(FreedmanParams(C, b, s)),
                "empirical_frequency": empirical_tail(dev, s),
                "final_positive_frequency": sum(r.transform_final[var] > 0 for r in ok) / len(ok),
            })
    return out


def _context(cfg: ExperimentConfig) -> dict[str, Any]:
    ctx: dict[str, Any] = {}
    if cfg.process == "matching":
        if cfg.graph is not None:
            g = greedy_matching.read_graph(cfg.graph)
            if g.n != cfg.n or (cfg.d is not None and g.d != cfg.d):
                raise ConfigurationError(f"graph file has n={g.n}, d={g.d}")
            cfg.d = g.d
            ctx["graph"] = g
        elif cfg.gen == "circulant":
            ctx["graph"] = greedy_matching.gen_circulant(cfg.n, cfg.d)
    return ctx


def run_ensemble(cfg: ExperimentConfig) -> Ensemble:
    """Run every replica of the seed plan; results are merged in replica order."""
    cfg.validate()
    plan = cfg.seed_plan()
    ctx = _context(cfg)
    runner = _RUNNERS[cfg.process]
    first = plan.start

    def one(pair):
        index, seed = pair
        try:
            res, trace = runner(cfg, index, seed, ctx)
        except ParameterError:
            raise
        except DemLabError as exc:
            return ReplicaResult(index, seed, error=f"{type(exc).__name__}: {exc}"), None
        return res, trace if index == first else None

    t0 = time.perf_counter()
    pairs = list(zip(plan.indices(), plan.seeds()))
    workers = cfg.workers or os.cpu_count() or 1
    try:
        if workers == 1 or len(pairs) == 1:
            results = [one(p) for p in pairs]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, pairs))
    except ParameterError as exc:
        raise ConfigurationError(f"replica rejected the configuration: {exc}") from exc
    wall = time.perf_counter() - t0
    replicas = [r for r, _ in results]
    trace = results[0][1]
    report = EnsembleReport(
        process=cfg.process,
        params=cfg.process_params(),
        base_seed=cfg.base_seed,
        seed_start=cfg.seed_start,
        replicas=replicas,
        aggregate=_aggregate(cfg, replicas),
        tail_bounds=_tail_bounds(cfg, replicas),
    )
    return Ensemble(cfg, report, trace, wall)


# ---------------------------------------------------------------------------
# file output


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _finite_or_none(float(obj))
    return obj


def report_json(report: EnsembleReport) -> str:
    return json.dumps(_jsonable(report.to_dict()), indent=2, allow_nan=False) + "\n"


def emit_report(report: EnsembleReport, path: str | os.PathLike) -> None:
    """Write the report as one JSON object; non-finite reals become null."""
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(report_json(report))
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def load_report(path: str | os.PathLike) -> EnsembleReport:
    try:
        with open(path) as fh:
            return EnsembleReport.from_dict(json.load(fh))
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc


def _g(x: float) -> str:
    return "%.9g" % x


def timeseries_rows(trace: Optional[TraceSet], stride: int = 1, var: Optional[str] = None) -> list[str]:
    """CSV rows ordered by step, then by the trace's variable order."""
    if stride < 1:
        raise ParameterError("stride must be >= 1")
    rows = [CSV_HEADER]
    if trace is None or len(trace.steps) == 0:
        return rows
    cols = range(len(trace.var_ids))
    if var is not None:
        if var not in trace.var_ids:
            raise ConfigurationError(f"unknown variable {var!r}; have {', '.join(trace.var_ids)}")
        cols = [trace.var_ids.index(var)]
    last = len(trace.steps) - 1
    for r, step in enumerate(trace.steps):
        if r % stride and r != last:
            continue
        t = _g(step / trace.n)
        for j in cols:
            rows.append(",".join((
                str(int(step)), t, trace.var_ids[j], _g(trace.values[r, j]),
                _g(trace.traj[r, j]), _g(trace.lo[r, j]), _g(trace.hi[r, j]),
            )))
    return rows


def emit_timeseries(trace: Optional[TraceSet], path: str | os.PathLike, stride: int = 1,
                    var: Optional[str] = None) -> None:
    text = "\n".join(timeseries_rows(trace, stride, var)) + "\n"
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_outputs(ens: Ensemble, out_dir: str | os.PathLike) -> dict[str, Path]:
    """timeseries.csv, plotdata.csv and report.json (all deterministic) plus timing.json."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc}") from exc
    paths = {name: out / name for name in ("timeseries.csv", "plotdata.csv", "report.json", "timing.json")}
    emit_timeseries(ens.trace, paths["timeseries.csv"])
    plot_var = ens.config.plot_var
    if plot_var is None and ens.trace is not None:
        plot_var = ens.trace.var_ids[-1] if ens.config.process != "matching" else ens.trace.var_ids[0]
    emit_timeseries(ens.trace, paths["plotdata.csv"], var=plot_var)
    emit_report(ens.report, paths["report.json"])
    try:
        paths["timing.json"].write_text(json.dumps({
            "wall_clock_seconds": ens.wall_clock,
            "replicas": len(ens.report.replicas),
            "workers": ens.config.workers or os.cpu_count() or 1,
        }, indent=2) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write timing file: {exc}") from exc
    return paths


# ---------------------------------------------------------------------------
# deterministic verification suites


@dataclass
class CaseResult:
    name: str
    passed: bool
    measured: float
    tolerance: float = 0.0


@dataclass
class VerifySummary:
    kind: str
    cases: list[CaseResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    @property
    def pass_count(self) -> int:
        return sum(c.passed for c in self.cases)

    def lines(self) -> list[str]:
        out = [
            f"{'PASS' if c.passed else 'FAIL'} {c.name} measured={c.measured:.3g} tol={c.tolerance:.3g}"
            for c in self.cases
        ]
        out.append(f"{self.kind}: {self.pass_count}/{len(self.cases)} passed")
        return out


def _verify_identities(kmax: int = 20) -> list[CaseResult]:
    cases = []
    for k in range(1, kmax + 1):
        lhs, rhs = trajectories.verify_tree_identity(k)
        cases.append(CaseResult(f"tree-identity k={k}", lhs == rhs, float(abs(lhs - rhs))))
    return cases


def _verify_ode(system: str = "both", kappa: int = 6, t_end: float = 3.0, h: float = 1e-3,
                tol: float = 1e-6) -> list[CaseResult]:
    if system not in ("balls", "components", "both"):
        raise ParameterError(f"unknown ODE system {system!r}")
    if not 1 <= kappa <= er_components.KAPPA_MAX:
        raise ParameterError(f"kappa must lie in [1, {er_components.KAPPA_MAX}]")
    cases = []
    for name in ("balls", "components"):
        if system not in (name, "both"):
            continue
        sysm = trajectories.balls_system(kappa) if name == "balls" else trajectories.components_system(kappa)
        closed = trajectories.balls_x if name == "balls" else trajectories.components_y
        ts, ys = trajectories.integrate_rk4(sysm, t_end, h)
        for j, k in enumerate(sysm.ks):
            err = max(abs(ys[r, j] - closed(k, float(t))) for r, t in enumerate(ts))
            cases.append(CaseResult(f"rk4 {name} k={k} t<={t_end:g}", err <= tol, err, tol))
    return cases


def _random_reachable_er(n: int, rng: np.random.Generator) -> er_components.ComponentState:
    edges = rng.integers(0, n * (n - 1) // 2)
    st = er_components.er_init(n, int(rng.integers(0, 2**63)))
    for _ in range(edges):
        er_components.er_step(st)
    return st


def _verify_drift_oracles(process: str = "all", n: int = 10, states: int = 100,
                          seed: int = 0, kmax: int = 5, d: int = 3) -> list[CaseResult]:
    if process not in ("balls", "er", "matching", "all"):
        raise ParameterError(f"unknown process {process!r}")
    rng = np.random.default_rng(seed)
    cases = []
    if process in ("balls", "all"):
        nb = min(n, 12)
        worst = 0.0
        exact = True
        for _ in range(states):
            st = balls_bins.bb_init(nb, int(rng.integers(0, 2**63)))
            for _ in range(int(rng.integers(0, 3 * nb))):
                balls_bins.bb_step(st)
            for k in range(kmax + 1):
                formula = balls_bins.bb_exact_drift(st, k)
                oracle = balls_bins.bb_enumerated_drift(st, k)
                exact &= formula == float(oracle)
                worst = max(worst, abs(formula - float(oracle)))
        cases.append(CaseResult(f"balls-bins n={nb} exact drift", exact, worst))
    if process in ("er", "all"):
        ne = min(n, er_components.ORACLE_N_MAX)
        worst_ratio = 0.0
        for _ in range(states):
            st = _random_reachable_er(ne, rng)
            if st.i >= st.max_edges:
                continue
            for k in range(1, kmax + 1):
                gap = abs(er_components.er_formula_drift(st, k) - float(er_components.er_exact_drift_oracle(st, k)))
                worst_ratio = max(worst_ratio, gap / (40 * k**3 / ne))
        cases.append(CaseResult(f"er-components n={ne} drift within 40k^3/n", worst_ratio <= 1.0,
                                worst_ratio, 1.0))
    if process in ("matching", "all"):
        graphs = [("C_4", greedy_matching.gen_circulant(4, 2)), ("K_4", greedy_matching.gen_circulant(4, 3))]
        exact = True
        for name, g in graphs:
            st = greedy_matching.match_init(g, 0)
            ok = all(
                greedy_matching.match_exact_drift_fraction(st, v) == greedy_matching.match_enumerated_drift(st, v)
                for v in range(g.n)
            )
            cases.append(CaseResult(f"matching {name} exact drift", ok, 0.0 if ok else 1.0))
        nm = 20 if n < 20 else n
        for _ in range(states):
            g = greedy_matching.gen_pairing(nm, d, int(rng.integers(0, 2**63)))
            st = greedy_matching.match_init(g, int(rng.integers(0, 2**63)))
            for _ in range(int(rng.integers(0, nm // 2))):
                if st.alive_count == 0:
                    break
                greedy_matching.match_step(st)
            if st.alive_count == 0:
                continue
            for v in range(nm):
                exact &= (greedy_matching.match_exact_drift_fraction(st, v)
                          == greedy_matching.match_enumerated_drift(st, v))
        cases.append(CaseResult(f"matching n={nm} d={d} random states exact drift", exact, 0.0 if exact else 1.0))
    return cases


VERIFY_KINDS: dict[str, Callable[..., list[CaseResult]]] = {
    "identities": _verify_identities,
    "ode": _verify_ode,
    "drift-oracles": _verify_drift_oracles,
}


def verify_suite(kind: str, params: Optional[dict[str, Any]] = None) -> VerifySummary:
    if kind not in VERIFY_KINDS:
        raise ParameterError(f"unknown verification kind {kind!r}")
    return VerifySummary(kind, VERIFY_KINDS[kind](**(params or {})))
