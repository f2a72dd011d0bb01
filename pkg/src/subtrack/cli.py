"""Command-line front end: ``subtrack {generate,detect,trace,bench}``.

Exit codes: 0 success, 1 usage / I/O / parse errors, 2 degenerate input
(thresholding left an empty subspace).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from .detector import DetectorConfig, default_config, detect, scan
from .errors import DegenerateRankError, SubtrackError
from .evaluation import rows_to_csv, rows_to_json, run_replications
from .generator import build_scenario, build_toy, scenario_params
from .netdata import format_dnet, read_dnet, sequence_sparsity_estimate

log = logging.getLogger("subtrack")

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2

BENCH_DEFAULTS = {
    "I": {"n": 100, "T": 200, "params": ["1/10", "1/15", "1/20"]},
    "II": {"n": 100, "T": 50, "params": ["0.3", "0.2", "0.1"]},
    "III": {"n": 100, "T": 150, "params": ["80/n", "50/n", "30/n"]},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def write_atomic(path, data: str | bytes):
    """Write via a temporary file in the target directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out):
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _add_detector_flags(p):
    p.add_argument("input", help="DNET v1 file")
    p.add_argument("--window", type=int, help="window length L")
    p.add_argument("--threshold", type=float, help="eigenvalue threshold b")
    p.add_argument("--auto", action="store_true",
                   help="derive any missing L / b from the data (default when neither is given)")
    p.add_argument("--proj-multiplier", type=float, default=None,
                   help="projection trigger is this multiple of b (default 1+sqrt(2))")
    p.add_argument("--out", "-o", help="output path (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subtrack", description="Network subspace change-point detection.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="simulate a dynamic SBM sequence")
    g.add_argument("--scenario", default="I", choices=["I", "II", "III", "toy"])
    g.add_argument("--param", help="s (I), q (II) or rho (III, e.g. 80/n)")
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--T", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", "-o", required=True, help="DNET output path; truth goes to <name>.truth.json")

    d = sub.add_parser("detect", help="detect change points in a DNET file")
    _add_detector_flags(d)
    d.add_argument("--trace", help="also write the statistic trace CSV here")

    t = sub.add_parser("trace", help="export the scan statistic trace as CSV")
    _add_detector_flags(t)

    b = sub.add_parser("bench", help="Monte-Carlo replications in the style of the simulation tables")
    b.add_argument("--scenario", default="I", choices=["I", "II", "III"])
    b.add_argument("--param", action="append", help="grid value; repeatable (default: the scenario's grid)")
    b.add_argument("--n", type=int, default=None)
    b.add_argument("--T", type=int, default=None)
    b.add_argument("--reps", type=int, default=50)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out-dir", required=True)
    return parser


def _config_for(args, g) -> DetectorConfig:
    overrides = {}
    if args.proj_multiplier is not None:
        overrides["proj_multiplier"] = args.proj_multiplier
    if args.window is not None and args.threshold is not None and not args.auto:
        return DetectorConfig(L=args.window, b=args.threshold, **overrides)
    return default_config(g.n, g.T, sequence_sparsity_estimate(g),
                          L=args.window, b=args.threshold, **overrides)


def cmd_generate(args) -> int:
    out = Path(args.out)
    if args.scenario == "toy":
        gt, g = build_toy(n=args.n or 100, T=args.T or 400, seed=args.seed)
        params = {"scenario": "toy", "n": gt.n, "T": gt.T, "seed": args.seed}
    else:
        defaults = BENCH_DEFAULTS[args.scenario]
        value = args.param if args.param is not None else defaults["params"][0]
        p = scenario_params(args.scenario, value, args.n or defaults["n"], args.T or defaults["T"], args.seed)
        gt, g = build_scenario(p)
        params = {"scenario": args.scenario, "param": value, "n": p.n, "T": p.T,
                  "s": p.s, "q": p.q, "rho": p.rho, "seed": p.seed}
    truth = gt.to_json()
    truth["params"] = params
    name = out.name[: -len(out.suffix)] if out.suffix else out.name
    write_atomic(out, format_dnet(g))
    write_atomic(out.with_name(f"{name}.truth.json"), _dumps(truth))
    log.info("wrote %s (n=%d, T=%d, change points %s)", out, g.n, g.T, list(gt.change_points))
    return EXIT_OK


def cmd_detect(args) -> int:
    g = read_dnet(args.input)
    config = _config_for(args, g)
    report = detect(g, config)
    if args.trace:
        write_atomic(args.trace, report.trace.to_csv())
    _emit(_dumps(report.to_json(trace_csv_path=args.trace)), args.out)
    log.info("coarse %s, refined %s", list(report.coarse.points), list(report.refined.points))
    return EXIT_OK


def cmd_trace(args) -> int:
    g = read_dnet(args.input)
    result = scan(g, _config_for(args, g))
    _emit(result.trace.to_csv(), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    defaults = BENCH_DEFAULTS[args.scenario]
    n = args.n or defaults["n"]
    T = args.T or defaults["T"]
    values = args.param or defaults["params"]
    grid = [(args.scenario, v, scenario_params(args.scenario, v, n, T, args.seed)) for v in values]
    rows = run_replications(grid, args.reps, workers=args.workers)
    out_dir = Path(args.out_dir)
    stem = f"scenario_{args.scenario}"
    write_atomic(out_dir / f"{stem}.csv", rows_to_csv(rows))
    payload = {"scenario": args.scenario, "n": n, "T": T, "reps": args.reps,
               "seed": args.seed, "rows": rows_to_json(rows)}
    write_atomic(out_dir / f"{stem}.json", _dumps(payload))

    print(f"Scenario {args.scenario} (n={n}, T={T}, R={args.reps})")
    print(f"{'param':>8} {'method':>8} {'|K-K*|':>14} {'Hausdorff':>14} {'fail':>5}")
    for r in rows:
        print(f"{r.param:>8} {r.method:>8} {r.count_mean:6.2f}({r.count_se:4.2f})  "
              f"{r.haus_mean:6.2f}({r.haus_se:4.2f}) {r.failures:5d}")
    for r in rows:
        if r.failures:
            print(f"warning: {r.failures} of {r.R} replications failed for {r.param}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "detect": cmd_detect, "trace": cmd_trace, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except DegenerateRankError as exc:
        print(f"subtrack: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (SubtrackError, OSError) as exc:
        print(f"subtrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
