"""Command-line entry point for running experiments and validating configs.

Exit codes: 0 success, 2 config error, 3 solver failure (all runs failed),
4 partial results (some runs failed; artifacts keep every row with a
status column).
"""

import argparse
import sys

from . import presets
from .errors import ConfigError, SolverFailure
from .experiments import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    KINDS,
    ExperimentSpec,
    run_experiment,
)
from .scenario import load_config

_PRESETS = {"table1": presets.table1, "fig6": presets.fig6}


def _resolve_config(value):
    if value in _PRESETS:
        return _PRESETS[value]()
    return load_config(value)


_SCALAR_SWEEP_KEYS = {"source", "margin_db", "iters", "known_angle", "i_count",
                      "lo_deg", "hi_deg"}


def _parse_sweep(items):
    """Parse repeated --sweep KEY=V1,V2,... flags into {key: values}."""
    sweep = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--sweep expects KEY=V1,V2,..., got '{item}'")
        key, _, raw = item.partition("=")
        values = []
        for token in raw.split(","):
            token = token.strip()
            try:
                values.append(int(token))
            except ValueError:
                try:
                    values.append(float(token))
                except ValueError:
                    values.append(token)
        sweep[key] = values[0] if key in _SCALAR_SWEEP_KEYS else values
    return sweep


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dfrcopt",
        description="Worst-case SCNR beamforming experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment kind")
    run_p.add_argument("--kind", required=True, choices=KINDS)
    run_p.add_argument("--config", default="table1",
                       help="preset name (table1, fig6) or path to a JSON config")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--seeds", type=int, default=10)
    run_p.add_argument("--seed-base", type=int, default=1)
    run_p.add_argument("--sweep", action="append", metavar="KEY=V1,V2,...",
                       help="override a sweep axis (repeatable)")
    run_p.add_argument("--grid-points", type=int, default=721)

    bp = sub.add_parser("beampattern", help="export a receive beampattern CSV")
    bp.add_argument("--config", default="fig6")
    bp.add_argument("--out", required=True)
    bp.add_argument("--source", default="proposed",
                    help="'proposed' or 'dedicated:<target index>'")
    bp.add_argument("--grid-points", type=int, default=721)
    bp.add_argument("--seed-base", type=int, default=1)

    ba = sub.add_parser("baseline-audit", help="audit the frozen-covariance baseline")
    ba.add_argument("--config", default="table1")
    ba.add_argument("--out", required=True)
    ba.add_argument("--seeds", type=int, default=50)
    ba.add_argument("--seed-base", type=int, default=1)
    ba.add_argument("--iters", type=int, default=8)

    vc = sub.add_parser("validate-config", help="parse and validate a config file")
    vc.add_argument("--config", required=True)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate-config":
            config = _resolve_config(args.config)
            print(f"ok: K={config.k_users} I={config.n_targets} "
                  f"J={config.n_clutter} n_tx={config.geometry.n_tx} "
                  f"n_rx={config.geometry.n_rx}")
            return EXIT_OK

        config = _resolve_config(args.config)
        if args.command == "run":
            spec = ExperimentSpec(
                kind=args.kind, base_config=config, output_dir=args.out,
                n_seeds=args.seeds, seed_base=args.seed_base,
                sweep=_parse_sweep(args.sweep), grid_points=args.grid_points)
        elif args.command == "beampattern":
            spec = ExperimentSpec(
                kind="beampattern", base_config=config, output_dir=args.out,
                n_seeds=1, seed_base=args.seed_base,
                sweep={"source": args.source}, grid_points=args.grid_points)
        else:
            spec = ExperimentSpec(
                kind="baseline_audit", base_config=config, output_dir=args.out,
                n_seeds=args.seeds, seed_base=args.seed_base,
                sweep={"iters": args.iters})
        code, paths = run_experiment(spec)
        for path in paths:
            print(path)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
