"""Command-line entry point: ``dem-lab balls-bins|er-components|matching|verify``.

Exit codes: 0 success, 1 envelope-violation frequency above
``--max-violation-rate``, 2 parameter or configuration error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .errors import DemLabError, OutputError, ParameterError
from .harness import build_config, read_config_file, run_ensemble, verify_suite, write_outputs

EXIT_OK, EXIT_VIOLATIONS, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int)
    p.add_argument("--seeds", type=int, help="number of replicas")
    p.add_argument("--base-seed", type=int)
    p.add_argument("--seed-start", type=int, help="index of the first replica (default 0)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--stride", type=int, help="record every r-th step (default max(1, steps/2000))")
    p.add_argument("--workers", type=int, help="replica threads (default: available cores)")
    p.add_argument("--plot-var", help="variable written to plotdata.csv")
    p.add_argument("--max-violation-rate", type=float)
    p.add_argument("--no-drift-check", dest="check_drift", action="store_const", const=False)
    p.add_argument("--config", help="flat key=value file; command-line flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dem-lab", description="Dynamic-concentration simulation lab.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    bb = sub.add_parser("balls-bins", help="balls into bins occupancy counts X_k")
    _common(bb)
    bb.add_argument("--m", type=int)
    bb.add_argument("--kappa", type=int)
    bb.add_argument("--envelope", choices=["basic", "selfcorrect"])
    bb.add_argument("--alpha", type=float)

    er = sub.add_parser("er-components", help="Erdos-Renyi process, component counts Y_k")
    _common(er)
    er.add_argument("--c", type=float)
    er.add_argument("--kappa", type=int)

    mt = sub.add_parser("matching", help="random greedy matching on a d-regular graph")
    _common(mt)
    mt.add_argument("--d", type=int)
    mt.add_argument("--gen", choices=["circulant", "pairing"])
    mt.add_argument("--K", type=float)
    mt.add_argument("--graph", help="graph file: 'n d' then one 'u v' edge per line")
    mt.add_argument("--tracked", help="comma-separated vertices whose D_v is traced (default 0)")

    vf = sub.add_parser("verify", help="deterministic verification suites")
    vf.add_argument("kind", choices=["identities", "ode", "drift-oracles"])
    vf.add_argument("--kmax", type=int, help="identities: largest k; drift-oracles: largest k")
    vf.add_argument("--system", choices=["balls", "components", "both"])
    vf.add_argument("--kappa", type=int)
    vf.add_argument("--t-end", type=float)
    vf.add_argument("--h", type=float)
    vf.add_argument("--tol", type=float)
    vf.add_argument("--process", choices=["balls", "er", "matching", "all"])
    vf.add_argument("--n", type=int)
    vf.add_argument("--d", type=int)
    vf.add_argument("--states", type=int)
    vf.add_argument("--seed", type=int)
    return parser


_VERIFY_FLAGS = {
    "identities": ("kmax",),
    "ode": ("system", "kappa", "t_end", "h", "tol"),
    "drift-oracles": ("process", "n", "d", "states", "seed", "kmax"),
}


def _run_verify(args) -> int:
    allowed = _VERIFY_FLAGS[args.kind]
    params = {}
    for key in ("kmax", "system", "kappa", "t_end", "h", "tol", "process", "n", "d", "states", "seed"):
        value = getattr(args, key)
        if value is None:
            continue
        if key not in allowed:
            raise ParameterError(f"--{key.replace('_', '-')} does not apply to verify {args.kind}")
        params[key] = value
    summary = verify_suite(args.kind, params)
    for line in summary.lines():
        print(line)
    return EXIT_OK if summary.passed else EXIT_VIOLATIONS


def _run_process(args) -> int:
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    overrides["process"] = args.command
    file_values = read_config_file(args.config) if args.config else {}
    cfg = build_config(file_values, overrides)
    if cfg.out is None:
        raise ParameterError("--out is required")
    ens = run_ensemble(cfg)
    paths = write_outputs(ens, cfg.out)
    agg = ens.report.aggregate
    print(f"{cfg.process}: {len(ens.report.replicas)} replicas, "
          f"violation frequency {agg['violation_frequency']:.4g}, errors {agg['errors']}")
    if "unmatched_fraction_mean" in agg:
        print(f"mean unmatched fraction {agg['unmatched_fraction_mean']:.4g}")
    for tb in ens.report.tail_bounds:
        print(f"{tb['var']}: {tb['inequality']} bound {tb['bound']:.4g}, "
              f"empirical {tb['empirical_frequency']:.4g}")
    print(f"wrote {paths['report.json'].parent}")
    return EXIT_VIOLATIONS if agg["violation_frequency"] > cfg.max_violation_rate else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "tracked", None) is not None:
        args.tracked = args.tracked.replace(",", " ")
    try:
        if args.command == "verify":
            return _run_verify(args)
        return _run_process(args)
    except OutputError as exc:
        print(f"dem-lab: {exc}", file=sys.stderr)
        return EXIT_IO
    except ParameterError as exc:
        print(f"dem-lab: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DemLabError as exc:
        print(f"dem-lab: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
