"""``riselab <scenario> --config FILE [--grid M] [--seed S] [--seeds N] [--dt D] [--out DIR]``.

Exit codes: 0 pass, 1 violation, 2 usage or configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .rearrange import InvalidInput
from .report import ArtifactError, write_report
from .scenarios import SCENARIOS, config_from_mapping, load_config, run

EXIT_PASS, EXIT_VIOLATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riselab", description="Rise laboratory scenarios in the toric model.")
    p.add_argument("scenario", nargs="?", choices=SCENARIOS, help="scenario to run")
    p.add_argument("--scenario", dest="scenario_opt", choices=SCENARIOS, help="alternative to the positional")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--grid", type=int, help="polytope grid size m")
    p.add_argument("--dim", type=int, choices=(1, 2))
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--seeds", type=int, help="number of seeds")
    p.add_argument("--dt", type=float, help="time step for finite differences")
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-svg", action="store_true", help="skip SVG output")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    scenario = args.scenario_opt or args.scenario
    overrides = dict(scenario=scenario, m=args.grid, dim=args.dim, seed=args.seed,
                     seeds=args.seeds, dt=args.dt, out=args.out)
    if args.no_svg:
        overrides["svg"] = False
    try:
        if args.config:
            cfg = load_config(args.config, **overrides)
        else:
            cfg = config_from_mapping({}, **overrides)
    except OSError as exc:
        print(f"riselab: cannot read config {args.config}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidInput as exc:
        print(f"riselab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = run(cfg)
    except InvalidInput as exc:
        print(f"riselab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        paths = write_report(report)
    except ArtifactError as exc:
        print(f"riselab: {exc}", file=sys.stderr)
        return EXIT_IO
    if not args.quiet:
        failed = sum(not r["pass"] for r in report.records)
        status = "PASS" if report.passed else "FAIL"
        print(f"{cfg.scenario}: {status} ({len(report.records) - failed}/{len(report.records)} checks)")
        for path in paths:
            print(f"  wrote {path}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
