"""Command-line front end.

Exit codes: 0 success, 1 scenario checks failed, 2 configuration error,
3 numerical abort, 4 property-suite failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, ScenarioKind, load_scenario, shipped_path
from .controllers import GainError
from .experiments import MetricsSummary, run_scenario
from .sim import SimulationAbort

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG = 2
EXIT_ABORT = 3
EXIT_SUITE = 4

# subcommand -> (accepted kinds, shipped default config)
_COMMANDS = {
    "simulate": (tuple(ScenarioKind), "tracking"),
    "compare-unwinding": ((ScenarioKind.UNWINDING,), "unwinding"),
    "portrait-s1": ((ScenarioKind.CYLINDER_PORTRAIT,), "portrait"),
    "verify": ((ScenarioKind.PROPERTY_SUITE,), "verify"),
}

_HELP = {
    "simulate": "run any scenario (tracking by default)",
    "compare-unwinding": "quaternion versus SO(3) sliding-mode regulation",
    "portrait-s1": "phase-portrait grids on the cylinder",
    "verify": "run the invariant property suites",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="so3smc", description="Sliding-mode attitude control experiments on SO(3)."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, default) in _COMMANDS.items():
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", metavar="PATH",
                       help=f"scenario JSON (default: shipped '{default}' scenario)")
        p.add_argument("--out", metavar="PREFIX", help="output path prefix")
        p.add_argument("--seed", type=int, metavar="N", help="override the scenario seed")
        p.add_argument("--quiet", action="store_true", help="do not print the summary table")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kinds, default = _COMMANDS[args.command]
    path = args.config or shipped_path(default)
    try:
        sc = load_scenario(path, seed=args.seed, output_prefix=args.out)
        if sc.kind not in kinds:
            allowed = ", ".join(k.value for k in kinds)
            raise ConfigError("kind", f"'{args.command}' expects {allowed}; got {sc.kind.value}")
        summary: MetricsSummary = run_scenario(sc)
    except (ConfigError, GainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    if not args.quiet:
        print(summary.table())
    if not summary.suites_passed:
        return EXIT_SUITE
    return EXIT_OK if summary.passed else EXIT_CHECKS_FAILED


if __name__ == "__main__":
    sys.exit(main())
