#!/usr/bin/env python
import argparse
import sys
from dataclasses import replace
from typing import List, Optional

from oris_noma.simulation.scenario import PRESETS, ScenarioException, load_scenario, preset_scenarios, \
    validation_report
from oris_noma.simulation.sweep import run_sweep, write_csv
from oris_noma.utils.logging import logger

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oris-noma",
                                     description="Outage analysis of ORIS-assisted FSO NOMA downlinks")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="evaluate a scenario sweep and write CSV rows")
    run.add_argument("scenario", nargs="?", help="scenario JSON file (optional with --preset)")
    run.add_argument("--out", help="CSV output path (stdout by default)")
    run.add_argument("--preset", choices=sorted(PRESETS), help="figure preset to expand")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--trials", type=int, help="Monte Carlo trials per estimate")
    run.add_argument("--terms", type=int, help="initial series truncation N")
    run.add_argument("--workers", type=int, help="sweep worker threads")

    validate = commands.add_parser("validate", help="check a scenario and report derived parameters")
    validate.add_argument("scenario", help="scenario JSON file")
    return parser


def _run(args) -> int:
    if args.scenario is None and args.preset is None:
        logger.error("run needs a scenario file, a preset, or both")
        return EXIT_INVALID
    base, preset = (load_scenario(args.scenario) if args.scenario else (None, None))
    preset = args.preset or preset
    scenarios = preset_scenarios(preset, base) if preset else [base]

    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["mc_trials"] = args.trials
    if args.terms is not None:
        changes["series_terms"] = args.terms
    scenarios = [replace(s, **changes) for s in scenarios]
    for scenario in scenarios:
        scenario.validate()

    rows = run_sweep(scenarios, workers=args.workers)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as handle:
            write_csv(rows, handle)
        logger.info(f"Wrote {len(rows)} rows to {args.out}")
    else:
        write_csv(rows, sys.stdout)
    return EXIT_NUMERICAL if any(row.failed for row in rows) else EXIT_OK


def _validate(args) -> int:
    scenario, _ = load_scenario(args.scenario, validate=False)
    ok, report = validation_report(scenario)
    print(report)
    return EXIT_OK if ok else EXIT_INVALID


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command-line entry point.

    Returns:
        int: 0 on success, 2 on an invalid scenario, 3 when some rows could not be evaluated.
    """
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        return _validate(args)
    except ScenarioException as e:
        for problem in e.violations:
            print(f"invalid scenario: {problem}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
