#!/usr/bin/env python3
"""
stochastic-csvac command-line front end.

Runs one subcommand per invocation and writes its artifacts plus a run
manifest (resolved config, seed, version, wall time, outputs) into the output
directory.

Usage:
    # Pinch-off sweep of the NMOS level
    stochastic-csvac characteristics --set kind=NMOS --set v_d=15

    # Headline multistage result with the built-in simulation fit
    stochastic-csvac scheme1 --set a_in=2 --set gain=2

    # Config file plus overrides
    stochastic-csvac relax --config configs/relax.conf --seed 7

    # Regenerate a previous run
    stochastic-csvac scheme1 --from-manifest runs/scheme1/manifest.json
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from .. import __version__
from ..core.errors import ConfigError, CsvacError
from ..utils.io import build_manifest, write_json
from .commands import COMMANDS, resolve_fit
from .config import (
    COMMAND_SCHEMAS,
    RunConfig,
    load_config_file,
    load_manifest_config,
    parse_assignment,
    resolve_config,
)

logger = logging.getLogger(__name__)

FIT_DRIVEN_COMMANDS = frozenset({'optimize', 'scheme1', 'stage-map'})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='stochastic-csvac',
        description="Stochastic-thermodynamics transistor and CSVAC amplifier simulator",
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='Config file with key = value lines')
    common.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                        help='Override one config key (repeatable)')
    common.add_argument('--seed', type=int, help='Random seed (required by gillespie and relax)')
    common.add_argument('--output', type=Path, help='Output directory')
    common.add_argument('--format', choices=['csv', 'json'], help='Table format (default csv)')
    common.add_argument('--from-manifest', type=Path,
                        help="Rerun with the resolved config of a previous run's manifest")
    common.add_argument('--verbose', '-v', action='store_true', help='Debug logging')

    subparsers = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')
    for name, schema in COMMAND_SCHEMAS.items():
        keys = ', '.join(schema)
        subparsers.add_parser(name, parents=[common], help=f"keys: {keys}",
                              description=f"Config keys: {keys}")
    return parser


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Apply the precedence chain: defaults < file < --set < dedicated flags."""
    if args.from_manifest:
        cfg = load_manifest_config(args.from_manifest)
        if cfg.command != args.command:
            raise ConfigError(f"manifest is for {cfg.command!r}, not {args.command!r}")
        if args.output:
            cfg.output_path = args.output
        return cfg

    raw = load_config_file(args.config) if args.config else {}
    for assignment in args.set:
        key, value = parse_assignment(assignment)
        raw[key] = value

    fit_unit = None
    if args.command in FIT_DRIVEN_COMMANDS:
        fit_unit = resolve_fit(raw.get('fit', 'simulation').strip()).amplitude_unit.value
    return resolve_config(args.command, raw, args.seed, args.output, args.format, fit_unit)


def run(cfg: RunConfig) -> int:
    """Execute one resolved run and write its manifest."""
    start = time.perf_counter()
    result = COMMANDS[cfg.command](cfg)
    wall_time = time.perf_counter() - start

    manifest_path = cfg.output_path / 'manifest.json'
    write_json(manifest_path, build_manifest(
        command=cfg.command,
        config=cfg.to_dict(),
        seed=cfg.seed,
        version=__version__,
        wall_time_seconds=wall_time,
        outputs=result.outputs,
        rng_algorithm=result.rng_algorithm,
    ))

    print("\n" + "=" * 60)
    print(f"{cfg.command.upper()} COMPLETE ({wall_time:.1f}s)")
    print("=" * 60)
    for key, value in result.summary.items():
        print(f"  {key}: {value}")
    print(f"\nOutputs in: {cfg.output_path}")
    for path in result.outputs:
        print(f"  - {path.name}")
    print(f"  - {manifest_path.name}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s'
    )

    try:
        cfg = build_run_config(args)
        return run(cfg)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return 2
    except CsvacError as e:
        logger.error(f"{type(e).__name__}: {e}")
        diagnostics = getattr(e, 'diagnostics', None)
        if diagnostics:
            logger.error(f"Diagnostics: {diagnostics}")
        return 1
    except OSError as e:
        logger.error(f"Cannot write outputs: {e}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
