"""Command-line entry point: hfc <verb> --problem <file> [options]."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import SchemaError
from .suites import ALL_VERBS, emit_csv, emit_json, emit_plotdata, read_problem, run_suite, write_report

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hfc", description="Joint functional calculus checks for commuting matrix tuples.")
    ap.add_argument("verb", choices=ALL_VERBS)
    ap.add_argument("--problem", required=True, help="problem file (JSON)")
    ap.add_argument("--out", help="output directory; stdout when omitted")
    ap.add_argument("--format", choices=("json", "csv", "plotdata"), default="json")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, help="overrides the seed in the problem file")
    ap.add_argument("--nu", type=float, help="contour half-angle for every coordinate")
    ap.add_argument("--nodes-per-decade", type=int, help="contour nodes per decade of radius")
    ap.add_argument("--rmin", type=float, help="smallest contour radius")
    ap.add_argument("--rmax", type=float, help="largest contour radius")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        raw = read_problem(args.problem)
        quad = {"nu": args.nu, "nodes_per_decade": args.nodes_per_decade, "r_min": args.rmin, "r_max": args.rmax}
        report = run_suite(raw, args.verb, seed=args.seed, jobs=max(1, args.jobs), quadrature=quad)
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        if args.out:
            for path in write_report(report, args.format, args.out):
                log.info("wrote %s", path)
        elif args.format == "json":
            sys.stdout.write(emit_json(report))
        elif args.format == "csv":
            sys.stdout.write(emit_csv(report))
        else:
            for text in emit_plotdata(report).values():
                sys.stdout.write(text)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for c in report["checks"]:
        if not c["pass"]:
            print(f"FAIL {c['name']}: value={c['value']} target={c['target']} tolerance={c['tolerance']}"
                  + (f" ({c['error']})" if "error" in c else ""), file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
