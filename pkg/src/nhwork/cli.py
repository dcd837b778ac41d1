"""Command-line entry point.

    nhwork sweep-beta --gamma 2.1 --drive sudden --format json
    nhwork work-dist --config fig3.json --output fig3.csv
    nhwork spectrum --sites 20
    nhwork verify

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from nhwork import __version__
from nhwork.errors import NumericalError, ValidationError
from nhwork.experiments import RUNNERS, ExperimentConfig, config_from_dict, default_config
from nhwork.io import dumps

log = logging.getLogger("nhwork")

SUBCOMMANDS = {
    "spectrum": "spectrum_sweep",
    "work-dist": "work_distribution",
    "sweep-beta": "beta_sweep",
    "verify": "verify",
}

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nhwork", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nhwork {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--output", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--gamma", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--sites", type=int)
        p.add_argument("--ttot", type=float)
        p.add_argument("--drive", choices=("slow", "sudden"))
        p.add_argument("--rounds", type=int)
        p.add_argument("--dt", type=float)
        p.add_argument("--no-metadata", action="store_true", help="omit the metadata header")
        if name == "verify":
            p.add_argument("--subset", choices=("all", "hermitian"), default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (or per-experiment defaults) with command-line overrides applied."""
    experiment = SUBCOMMANDS[args.command]
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ValidationError(f"config: cannot read {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config: line {exc.lineno}: {exc.msg}") from None
        cfg = config_from_dict(data, experiment)
    else:
        cfg = default_config(experiment)

    lattice = {}
    if args.sites is not None:
        lattice["sites"] = args.sites
    if args.gamma is not None:
        cfg.gamma_grid = [args.gamma]
    if args.delta is not None:
        cfg.delta_grid = [args.delta]
        cfg.delta_ratio_grid = None
    if lattice:
        cfg.lattice = cfg.lattice.replace(**lattice)
    if args.beta is not None:
        cfg.beta_grid = [args.beta]
    if args.ttot is not None:
        cfg.t_total = args.ttot
    if args.drive is not None:
        cfg.drive_shapes = ["slow_sine" if args.drive == "slow" else "sudden"]
    if args.rounds is not None:
        cfg.rounds = [args.rounds]
    if args.dt is not None:
        cfg.dt = args.dt
    if args.output is not None:
        cfg.output_path = args.output
    if args.format is not None:
        cfg.output_format = args.format
    if getattr(args, "subset", None):
        cfg.verify_subset = args.subset
    return cfg.validate()


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        table = RUNNERS[cfg.experiment](cfg)
    except ValidationError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL

    if not args.no_metadata:
        table.metadata = {
            "program": "nhwork",
            "version": __version__,
            "experiment": cfg.experiment,
            "config": cfg.to_dict(),
            "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        }
    text = dumps(table, cfg.output_format)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    if cfg.experiment == "verify":
        failed = [row[0] for row in table.rows if not row[-1]]
        if failed:
            log.error("verification failed: %s", ", ".join(failed))
            return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
