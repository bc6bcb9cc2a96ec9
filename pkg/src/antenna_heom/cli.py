"""Command-line entry point: ``antenna-heom run <config> [options]``.

Exit codes: 0 success, 2 configuration error, 3 integration failure
(including scans with at least one failed cell; their CSV is still written).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from .config import ConfigError, load_config
from .integrate import IntegrationError
from .observables import scan_grid
from .simulation import CONVERGENCE_COLUMNS, build_setup, run_convergence, run_trajectory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3

log = logging.getLogger("antenna_heom")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_static(out, setup):
    with open(os.path.join(out, "eigen.json"), "w") as fh:
        fh.write(setup.eig.to_json() + "\n")
    if setup.expansion is not None:
        with open(os.path.join(out, "bath.json"), "w") as fh:
            fh.write(setup.expansion.to_json() + "\n")
    with open(os.path.join(out, "config.resolved"), "w") as fh:
        fh.write(setup.config.echo())


def run(config, out):
    """Execute ``config`` and write its artifacts into ``out``; returns an exit code."""
    os.makedirs(out, exist_ok=True)
    mode = config["mode"]
    setup = build_setup(config)
    _write_static(out, setup)

    if mode in ("trajectory", "field_free"):
        checkpoint = os.path.join(out, "checkpoint.json") if config["output.checkpoint"] else None
        result = run_trajectory(config, checkpoint_path=checkpoint, setup=setup)
        result.record.to_csv(os.path.join(out, "trajectory.csv"))
        meta = result.metadata()
        meta["mode"] = mode
        meta["wall_time_s"] = result.wall_time
        _write_json(os.path.join(out, "trajectory.json"), meta)
        log.info("%s run finished: R=%s", mode, meta["R"])
        return EXIT_OK

    if mode == "scan":
        result = scan_grid(config, config["scan.energies_1e8ha"], config["scan.durations_ns"],
                           workers=config["scan.workers"])
        result.to_csv(os.path.join(out, "scan.csv"))
        meta = {"mode": mode, "config": result.metadata, "derived": setup.describe(),
                "status": result.status}
        _write_json(os.path.join(out, "scan.json"), meta)
        if not result.ok:
            log.error("some scan cells failed; see scan.csv")
            return EXIT_INTEGRATION
        return EXIT_OK

    rows = run_convergence(config)
    with open(os.path.join(out, "convergence.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CONVERGENCE_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in CONVERGENCE_COLUMNS])
    _write_json(os.path.join(out, "convergence.json"),
                {"mode": mode, "config": config.summary(), "derived": setup.describe(), "rows": rows})
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="antenna-heom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a configuration file")
    p_run.add_argument("config", help="path to a key = value configuration file")
    p_run.add_argument("--out", default="out", help="output directory (default: out)")
    p_run.add_argument("--mode", choices=("trajectory", "field_free", "scan", "convergence"),
                       help="override the configured mode")
    p_run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
    p_run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.override)
    if args.mode:
        overrides.append(f"mode={args.mode}")
    try:
        config = load_config(args.config, overrides)
    except OSError as exc:
        print(f"error: cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(config, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except ValueError as exc:  # physically invalid parameter combinations
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
