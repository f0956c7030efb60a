"""Command line entry point: verify, simulate, drift-check.

Exit codes: 0 success, 1 failed checks, 2 invalid input, 3 aborted run.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_ABORT = 0, 1, 2, 3

log = logging.getLogger("gyrokin")


def _eps_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse eps list {text!r}") from exc
    if len(vals) < 2:
        raise argparse.ArgumentTypeError("need at least two eps values")
    return vals


def build_parser() -> argparse.ArgumentParser:
    from . import __version__
    from .verify import FAULTS, SUITES

    ap = argparse.ArgumentParser(prog="gyrokin", description="Gyroaveraged collision operators and limit-model solver.")
    ap.add_argument("--version", action="version", version=f"gyrokin {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run property suites")
    v.add_argument("--suite", choices=SUITES + ("all",), default="all")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--fault", choices=FAULTS, default=None, help="inject a known defect")
    v.add_argument("--report", type=Path, default=None, help="also write the JSON report here")

    s = sub.add_parser("simulate", help="run the limit-model solver")
    s.add_argument("--config", type=Path, required=True)
    s.add_argument("--output", type=Path, default=None, help="override output.directory")

    d = sub.add_parser("drift-check", help="guiding-center error of the fast system against the averaged drift")
    d.add_argument("--config", type=Path, required=True)
    d.add_argument("--eps", type=_eps_list, default=None, help='decreasing list, e.g. "1e-1,5e-2,2.5e-2"')
    d.add_argument("--csv", type=Path, default=None, help="CSV path (default: <output>/drift_check.csv)")
    return ap


def cmd_verify(args) -> int:
    from .verify import run_suites

    report = run_suites(args.suite, args.seed, args.fault)
    text = json.dumps(report, indent=1)
    print(text)
    if args.report:
        args.report.write_text(text)
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_simulate(args) -> int:
    from . import config as C
    from .diagnostics import DiagnosticsWriter, dump_snapshot
    from .grid import project_initial
    from .gyroaverage import GyroQuadratureConfig
    from .solver import CFLError, StepSizeError, run

    cfg = C.load(args.config)
    out_dir = args.output or cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    g0 = project_initial(cfg.initial.full_density(cfg.params, cfg.grid), cfg.grid, cfg.params,
                         GyroQuadratureConfig(cfg.solver.n_gyro))
    last = {"index": -1}

    def on_snapshot(index, state):
        last["index"] = index
        if cfg.snapshots:
            dump_snapshot(state.density, out_dir / f"snapshot_{index:04d}", cfg.params, state.time)

    with DiagnosticsWriter(out_dir / "diagnostics.csv") as w:
        try:
            state = run(cfg.solver, g0, cfg.potential, cfg.params, on_record=w.write, on_snapshot=on_snapshot)
        except (CFLError, StepSizeError) as exc:
            good = getattr(exc, "last_good", None)
            if good is not None:
                base = out_dir / f"snapshot_{last['index'] + 1:04d}"
                dump_snapshot(good.density, base, cfg.params, good.time, {"aborted": str(exc)})
                print(f"gyrokin: run aborted at t={good.time:g}: {exc}; last good state in {base}.bin",
                      file=sys.stderr)
            else:
                print(f"gyrokin: run aborted: {exc}", file=sys.stderr)
            return EXIT_ABORT
    print(f"completed t={state.time:g}, {len(state.records)} records in {out_dir / 'diagnostics.csv'}")
    return EXIT_OK


def cmd_drift_check(args) -> int:
    from . import config as C
    from .solver import drift_check

    cfg = C.load(args.config)
    d = cfg.drift
    eps = args.eps or d.get("eps") or [1e-1, 5e-2, 2.5e-2]
    rows = drift_check(cfg.potential, cfg.params, eps, d.get("T", 1.0), d.get("x0", (0.5, 0.2, 0.0)),
                       d.get("v0", (0.8, 0.3, 0.1)))
    print(f"{'eps':>12} {'error':>14} {'order':>8}")
    for r in rows:
        order = r.get("order")
        print(f"{r['eps']:12.4e} {r['error']:14.6e} {'' if order is None else f'{order:8.4f}':>8}")
    path = args.csv or (cfg.output_dir / "drift_check.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["eps", "error", "order"])
        for r in rows:
            wr.writerow([repr(r["eps"]), repr(r["error"]), "" if "order" not in r else repr(r["order"])])
    return EXIT_OK


def main(argv=None) -> int:
    from .config import ConfigError

    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"verify": cmd_verify, "simulate": cmd_simulate, "drift-check": cmd_drift_check}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"gyrokin: invalid config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"gyrokin: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
