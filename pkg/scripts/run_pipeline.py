#!/usr/bin/env python3
"""
Stochastic CSVAC Pipeline

Regenerate every dataset of the study by running the CLI subcommands in
phases:
  - Phase 1: Transistor characteristics (NMOS and PMOS)
  - Phase 2: Single-NMOS amplifier response for three drain resistors
  - Phase 3: CSVAC transfer curve and stochastic relaxation overlay
  - Phase 4: Power map and power-law fit
  - Phase 5: Multistage optimization (Scheme 1 and stage-count maps)

Usage:
    # Full run
    uv run python scripts/run_pipeline.py

    # Skip the slow phases (relaxation overlay and power map)
    uv run python scripts/run_pipeline.py --quick
"""

import argparse
import logging
import subprocess
import sys
from pathlib import Path

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

SCRIPT_DIR = Path(__file__).parent
PROJECT_ROOT = SCRIPT_DIR.parent
CONFIG_DIR = PROJECT_ROOT / "configs"


def run_command(command: str, output_dir: Path, args: list = None) -> bool:
    """Run one CLI subcommand into output_dir/<label>."""
    cmd = [sys.executable, '-m', 'stochastic_csvac.pipeline.cli', command,
           '--output', str(output_dir)]
    if args:
        cmd.extend(args)

    logger.info(f"Running: {command} {' '.join(args or [])}")
    result = subprocess.run(cmd, cwd=PROJECT_ROOT)

    if result.returncode != 0:
        logger.error(f"Command {command} failed with code {result.returncode}")
        return False
    return True


def main():
    parser = argparse.ArgumentParser(
        description="Regenerate the stochastic CSVAC datasets"
    )
    parser.add_argument(
        '--output-dir',
        type=Path,
        default=PROJECT_ROOT / "runs" / "pipeline",
        help='Root directory for all phase outputs'
    )
    parser.add_argument(
        '--seed',
        type=int,
        default=2024,
        help='Base seed of the stochastic phases'
    )
    parser.add_argument(
        '--quick',
        action='store_true',
        help='Skip the relaxation overlay and the power map'
    )

    args = parser.parse_args()
    out = args.output_dir

    print("=" * 60)
    print("STOCHASTIC CSVAC PIPELINE")
    print("=" * 60)

    # Phase 1: Characteristics
    print("\n[Phase 1] Transistor characteristics...")
    for kind in ('NMOS', 'PMOS'):
        if not run_command('characteristics', out / f"characteristics_{kind.lower()}",
                           ['--config', str(CONFIG_DIR / 'characteristics.conf'),
                            '--set', f'kind={kind}']):
            return 1

    # Phase 2: Amplifier
    print("\n[Phase 2] Single-NMOS amplifier...")
    if not run_command('amplifier', out / 'amplifier',
                       ['--config', str(CONFIG_DIR / 'amplifier.conf')]):
        return 1

    # Phase 3: CSVAC transfer curve and relaxation
    print("\n[Phase 3] CSVAC transfer curve...")
    if not run_command('csvac-sweep', out / 'csvac_sweep',
                       ['--config', str(CONFIG_DIR / 'csvac-sweep.conf')]):
        return 1
    if not args.quick:
        if not run_command('relax', out / 'relax',
                           ['--config', str(CONFIG_DIR / 'relax.conf'), '--seed', str(args.seed)]):
            return 1
    else:
        print("  Relaxation overlay skipped")

    # Phase 4: Power map and fit
    if not args.quick:
        print("\n[Phase 4] Power map and fit...")
        if not run_command('power-map', out / 'power_map',
                           ['--config', str(CONFIG_DIR / 'power-map.conf')]):
            return 1
        if not run_command('fit', out / 'fit',
                           ['--set', f"input={out / 'power_map' / 'power_map.csv'}"]):
            return 1
    else:
        print("\n[Phase 4] Skipped")

    # Phase 5: Multistage
    print("\n[Phase 5] Multistage optimization...")
    if not run_command('scheme1', out / 'scheme1_simulation',
                       ['--config', str(CONFIG_DIR / 'scheme1.conf')]):
        return 1
    if not run_command('scheme1', out / 'scheme1_entity',
                       ['--config', str(CONFIG_DIR / 'scheme1-entity.conf')]):
        return 1
    if not run_command('stage-map', out / 'stage_map',
                       ['--config', str(CONFIG_DIR / 'stage-map.conf')]):
        return 1

    print("\n" + "=" * 60)
    print("PIPELINE COMPLETE")
    print("=" * 60)
    print(f"\nOutputs in: {out}")

    return 0


if __name__ == '__main__':
    exit(main())
