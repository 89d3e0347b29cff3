"""Command-line entry point.

Exit codes: 0 ok, 1 verification failed, 2 bad config or arguments,
3 a mode breaks one of the validity conditions.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .config import ExperimentConfig, load
from .datagen import export_dataset, synthesize_exact
from .errors import ConditionViolation, ConfigError, EpochDDError
from .experiments import (FIGURE_POINTS, FIGURE_PROMINENCE, FIGURE_RANGE, FIGURE_ROWS, SCENARIOS,
                          figure1, simulate, sweep_onset, write_json, write_onsets_csv)

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_CONDITION = 0, 1, 2, 3
OUT_ENV = "EPOCHDD_OUT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message short
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="epochdd", description="Epoch-wise double descent in two-layer linear networks.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--seed", type=int, default=None, help="seed (overrides the config's)")
    p.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./out)")
    p.add_argument("--config", default=None, help="experiment config JSON")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="error curves, trajectories and reports for a config")
    s.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    f = sub.add_parser("figure1", help="the two-row, three-scenario sweep figure")
    f.add_argument("--values", type=_floats, default=None,
                   help=f"sweep values (default {FIGURE_POINTS} log-spaced in {list(FIGURE_RANGE)})")
    f.add_argument("--prominence", type=float, default=FIGURE_PROMINENCE)
    f.add_argument("--no-onsets", action="store_true", help="skip the onset search")

    v = sub.add_parser("verify", help="run the invariant suites")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--inject-fault", action="store_true",
                   help="perturb one layer halfway through the conservation runs (negative control)")
    v.add_argument("--quiet", action="store_true")

    o = sub.add_parser("sweep-onset", help="smallest swept value showing double descent")
    o.add_argument("--scenario", choices=sorted(SCENARIOS) + ["all"], default="all")
    o.add_argument("--parameter", choices=FIGURE_ROWS, default="lambda_i")
    o.add_argument("--range", type=_floats, default=list(FIGURE_RANGE), metavar="LO,HI")
    o.add_argument("--prominence", type=float, default=FIGURE_PROMINENCE)

    d = sub.add_parser("dataset", help="write an exact-spectrum dataset to .npy files")
    d.add_argument("--n", type=int, default=64)
    d.add_argument("--lambdas", type=_floats, required=True)
    d.add_argument("--sigmas", type=_floats, required=True)
    d.add_argument("--rhos", type=_floats, required=True)
    d.add_argument("--d-y", type=int, required=True)
    return p


def _out_dir(args) -> str:
    return args.out or os.environ.get(OUT_ENV) or "out"


def _cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("simulate needs --config")
    cfg: ExperimentConfig = load(args.config)
    out = args.out or cfg.output_dir or os.environ.get(OUT_ENV) or "out"
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    report = simulate(cfg, out, jobs=max(1, args.jobs))
    found = sum(p["verdict"]["detected"] for p in report["points"])
    print(f"{len(report['points'])} point(s), double descent detected at {found}; wrote {out}")
    return EXIT_OK


def _cmd_figure1(args) -> int:
    out = _out_dir(args)
    report = figure1(out, args.seed or 0, args.values, args.prominence, onsets=not args.no_onsets)
    if report["onsets"]:
        write_onsets_csv(os.path.join(out, "onsets.csv"), report["onsets"])
    for row in FIGURE_ROWS:
        for sc in SCENARIOS:
            flags = "".join("x" if v["detected"] else "." for v in report["verdicts"]
                            if v["row"] == row and v["scenario"] == sc)
            print(f"{row:9s} {sc:10s} {flags}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import run

    def progress(res):
        if not args.quiet:
            print(f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.detail} ({res.seconds:.1f}s)", flush=True)

    report = run(args.level, args.inject_fault, progress)
    out = args.out or os.environ.get(OUT_ENV)
    if out:
        os.makedirs(out, exist_ok=True)
        write_json(os.path.join(out, "verify.json"), report)
    else:
        print(json.dumps({"passed": report["passed"], "failed": report["failed"]}, sort_keys=True))
    if not report["passed"]:
        print(f"failing invariant(s): {', '.join(report['failed'])}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_sweep_onset(args) -> int:
    if len(args.range) not in (1, 2):
        raise ConfigError("--range takes LO,HI or a single value")
    lo, hi = args.range[0], args.range[-1]
    scenarios = sorted(SCENARIOS) if args.scenario == "all" else [args.scenario]
    table = {args.parameter: {sc: sweep_onset(sc, args.parameter, lo, hi, args.prominence) for sc in scenarios}}
    for sc, v in table[args.parameter].items():
        print(f"{args.parameter} {sc}: {'absent' if v is None else format(v, '.6g')}")
    out = _out_dir(args)
    os.makedirs(out, exist_ok=True)
    write_onsets_csv(os.path.join(out, "onsets.csv"), table)
    return EXIT_OK


def _cmd_dataset(args) -> int:
    d_x = len(args.lambdas)
    ds = synthesize_exact(args.n, d_x, args.d_y, args.lambdas, args.sigmas, args.rhos, args.seed or 0)
    out = _out_dir(args)
    export_dataset(ds, out)
    print(f"wrote {ds.n}x{d_x} inputs and {ds.n}x{args.d_y} targets to {out}")
    return EXIT_OK


COMMANDS = {"simulate": _cmd_simulate, "figure1": _cmd_figure1, "verify": _cmd_verify,
            "sweep-onset": _cmd_sweep_onset, "dataset": _cmd_dataset}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConditionViolation as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONDITION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EpochDDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
