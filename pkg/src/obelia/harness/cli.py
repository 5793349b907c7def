"""``obelia-sim`` command line."""

from __future__ import annotations

import argparse
import os
import sys

from .golden import run_golden
from .scenarios import SUITES, Options, run_scenario


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obelia-sim", description="Seeded simulations of the two-tier DAG protocol.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write rows.csv / summary.json")
    r.add_argument("scenario", help="M-X, O-X-Y or a named suite (see `list`)")
    r.add_argument("--seeds", type=int, help="number of seeds (suite default otherwise)")
    r.add_argument("--load", type=float, help="injected load in tx/s")
    r.add_argument("--aux", type=int, help="override the aux validator count")
    r.add_argument("--crash-aux", type=int, help="aux validators crashed from the start")
    r.add_argument("--strict-aux", type=_bool, help="strict aux inclusion at leader rounds")
    r.add_argument("--duration", type=float, help="simulated duration in ms")
    r.add_argument("--out", default="out", help="output directory (default: ./out)")
    r.add_argument("--trace", action="store_true", help="also write trace.log")

    sub.add_parser("golden", help="check the scripted reference DAG")
    sub.add_parser("list", help="list named scenarios")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print("M-X              core-only committee of X validators")
        print("O-X-Y            X core and Y aux validators")
        for name, (_, desc) in SUITES.items():
            print(f"{name:<16} {desc}")
        return 0
    if args.command == "golden":
        g = run_golden()
        sys.stdout.write(g.report())
        m = run_golden(drop_aux_k=True)
        print(f"mutation control: {'detected' if not m.passed else 'MISSED'}")
        return 0 if g.passed and not m.passed else 1

    base = int(os.environ.get("OBELIA_SEED", "0"))
    opts = Options(
        seeds=args.seeds,
        base_seed=base,
        load=args.load,
        aux=args.aux,
        crash_aux=args.crash_aux,
        strict_aux=args.strict_aux,
        duration_ms=args.duration,
        trace=args.trace,
    )
    try:
        res = run_scenario(args.scenario, opts)
    except KeyError:
        print(f"unknown scenario {args.scenario!r}; try `obelia-sim list`", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"bad overrides: {e}", file=sys.stderr)
        return 2
    res.write(args.out)
    for v in res.verdicts:
        print(f"{'PASS' if v.passed else 'FAIL'}  {v.name}: {v.detail}")
    print(f"{len(res.rows)} runs -> {args.out}/rows.csv, {args.out}/summary.json")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
