"""Command-line entry point: ``antnet --scenario FILE`` or ``antnet --preset fig8``."""

from __future__ import annotations

import argparse
import sys

from .engine import SimError
from .experiment import PRESETS, RunOutcome, ScenarioError, load_scenario, run_preset, run_scenario

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="antnet", description="Run AntNet routing simulations.")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="PATH", help="scenario file to run")
    src.add_argument("--preset", metavar="NAME", choices=PRESETS, help="bundled removal scenario set (fig6, fig7, fig8)")
    ap.add_argument("--seed", type=int, help="override the scenario seed")
    ap.add_argument("--out", metavar="DIR", help="output directory")
    ap.add_argument("--baseline", action="store_true", help="add a paired static shortest-path run")
    ap.add_argument("--quiet", action="store_true", help="suppress the per-run report")
    return ap


def _report(outcome: RunOutcome) -> str:
    s = outcome.antnet.summary
    parts = [f"{outcome.scenario.name}: {s.completed}/{s.calls} calls completed"]
    if s.mean_delay is not None:
        parts.append(f"mean delay {s.mean_delay:.6f}s")
    coh = outcome.cohort_summary(outcome.antnet)
    if coh is not None and coh.calls:
        parts.append(f"post-removal cohort {coh.completed}/{coh.calls}")
    if outcome.static is not None:
        b = outcome.static.summary
        parts.append(f"static {b.completed}/{b.calls}")
        bc = outcome.cohort_summary(outcome.static)
        if bc is not None and bc.calls:
            parts.append(f"static cohort {bc.completed}/{bc.calls}")
    return ", ".join(parts)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.preset:
            outcomes = run_preset(args.preset, args.out, seed=args.seed, baseline=args.baseline)
        else:
            scenario = load_scenario(args.scenario)
            outcomes = [run_scenario(scenario, args.out, seed=args.seed, baseline=args.baseline)]
    except ScenarioError as exc:
        print(f"antnet: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, SimError) as exc:
        print(f"antnet: {exc}", file=sys.stderr)
        return EXIT_IO
    if not args.quiet:
        for outcome in outcomes:
            print(_report(outcome))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
