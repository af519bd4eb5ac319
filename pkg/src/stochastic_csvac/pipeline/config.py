"""
Run configuration for the command-line front end.

Config files hold one `key = value` per line; `#` starts a comment. Values are
numbers with an optional unit tag (`5 volt`, `15 V_T`), comma lists (`0, 2, 4`),
grids written `start:stop:count`, or plain words. Voltages are resolved to V_T;
fit amplitudes are resolved to the unit of the selected fit.

Precedence: command defaults < config file < --set flags < dedicated flags.
"""

import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional

import numpy as np
import regex as re

from ..core.errors import ConfigError
from ..core.units import DEFAULT_UNITS
from ..utils.io import read_json

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = 'STOCHASTIC_CSVAC_OUTPUT_DIR'
DEFAULT_OUTPUT_DIR = Path('runs')

NUMBER = r'[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?'
UNIT = r'V_T|volt|V'

LINE_PATTERN = re.compile(r'^\s*(?P<key>[A-Za-z_][\w]*)\s*=\s*(?P<value>[^#]*?)\s*(?:#.*)?$')
COMMENT_PATTERN = re.compile(r'^\s*(?:#.*)?$')
GRID_PATTERN = re.compile(rf'^(?P<start>{NUMBER}):(?P<stop>{NUMBER}):(?P<count>\d+)\s*(?P<unit>{UNIT})?$')
LIST_PATTERN = re.compile(rf'^(?P<items>{NUMBER}(?:\s*,\s*{NUMBER})*)\s*(?P<unit>{UNIT})?$')


class OutputFormat(Enum):
    CSV = "csv"
    JSON = "json"


class Kind(Enum):
    """How a config value is parsed and resolved."""
    FLOAT = "float"
    INT = "int"
    STR = "str"
    VOLTAGE = "voltage"
    VOLTAGE_GRID = "voltage_grid"
    FLOAT_GRID = "float_grid"
    AMPLITUDE = "amplitude"
    AMPLITUDE_GRID = "amplitude_grid"


REQUIRED = object()


@dataclass(frozen=True)
class Key:
    kind: Kind
    default: Any = REQUIRED
    help: str = ""


_CSVAC_KEYS = {
    'v_d': Key(Kind.VOLTAGE, 15.0, "supply voltage V_d"),
    'gamma': Key(Kind.FLOAT, 0.2, "transistor escape rate (1/beta*hbar)"),
    'gamma_l': Key(Kind.FLOAT, 0.01, "load escape rate (1/beta*hbar)"),
}

_FIT_KEYS = {
    'fit': Key(Kind.STR, 'simulation', "built-in fit name or path to a fit JSON"),
}

COMMAND_SCHEMAS: dict[str, dict[str, Key]] = {
    'characteristics': {
        'kind': Key(Kind.STR, 'NMOS', "NMOS or PMOS"),
        'eps0': Key(Kind.FLOAT, 0.0, "level reference energy (kT)"),
        'gamma': Key(Kind.FLOAT, 0.2, "escape rate (1/beta*hbar)"),
        'v_d': Key(Kind.VOLTAGE, 15.0, "drain bias of the transfer sweep"),
        'v_in_grid': Key(Kind.VOLTAGE_GRID, '-10:10:41', "gate grid"),
        'v_ds_grid': Key(Kind.VOLTAGE_GRID, '0:20:41', "drain-source grid"),
        'output_v_in': Key(Kind.VOLTAGE_GRID, '0, 2, 4', "gate voltages of the output family"),
    },
    'amplifier': {
        'v_dd': Key(Kind.VOLTAGE, 15.0, "supply voltage V_DD"),
        'gamma': Key(Kind.FLOAT, 0.2, "NMOS escape rate"),
        'gamma_r': Key(Kind.FLOAT_GRID, '0.02, 0.01, 0.005', "drain resistor escape rates"),
        'eps0': Key(Kind.FLOAT, 5.0, "NMOS reference energy (kT)"),
        'amplitude': Key(Kind.VOLTAGE, 0.1, "input amplitude"),
        'omega': Key(Kind.FLOAT, 0.5, "angular frequency (1/beta*hbar)"),
        'samples': Key(Kind.INT, 64, "samples per period"),
        'periods': Key(Kind.INT, 2, "number of periods"),
    },
    'csvac-sweep': {
        **_CSVAC_KEYS,
        'v_in_grid': Key(Kind.VOLTAGE_GRID, '-7.5:7.5:15', "input grid"),
        'waveform_amplitude': Key(Kind.VOLTAGE, -2.5, "amplitude of the sinusoidal input"),
        'waveform_omega': Key(Kind.FLOAT, 1.0 / 3.0, "angular frequency of the input (1/beta*hbar)"),
        'waveform_samples': Key(Kind.INT, 64, "samples per period of the waveform"),
    },
    'power-map': {
        **_CSVAC_KEYS,
        'a_in_grid': Key(Kind.VOLTAGE_GRID, '2:14:13', "input amplitudes"),
        'gain_grid': Key(Kind.FLOAT_GRID, '1:2:11', "target gains"),
        'period_samples': Key(Kind.INT, 32, "samples per period"),
    },
    'gillespie': {
        'kind': Key(Kind.STR, 'NMOS', "NMOS or PMOS"),
        'eps0': Key(Kind.FLOAT, 0.0, "level reference energy (kT)"),
        'gamma': Key(Kind.FLOAT, 0.2, "escape rate"),
        'v_d': Key(Kind.VOLTAGE, 15.0, "drain bias"),
        'v_in': Key(Kind.VOLTAGE, 0.0, "gate voltage"),
        'n_events': Key(Kind.INT, 1_000_000, "number of jumps"),
        'trajectory_events': Key(Kind.INT, 10_000, "jumps written to trajectory.csv"),
    },
    'relax': {
        **_CSVAC_KEYS,
        'v_in_grid': Key(Kind.VOLTAGE_GRID, '-7.5:7.5:15', "input grid"),
        'n_seeds': Key(Kind.INT, 10, "runs per input; seeds seed..seed+n_seeds-1"),
        'step_size': Key(Kind.FLOAT, 2.0, "relaxation step scale"),
        'batch_events': Key(Kind.INT, 8000, "jumps per iteration"),
        'min_iter': Key(Kind.INT, 30, "minimum iterations"),
        'max_iter': Key(Kind.INT, 80, "maximum iterations"),
    },
    'fit': {
        'input': Key(Kind.STR, REQUIRED, "CSV with a_in, gain and power columns"),
        'amplitude_unit': Key(Kind.STR, 'V_T', "unit of the a_in column"),
    },
    'optimize': {
        **_FIT_KEYS,
        'a_in': Key(Kind.AMPLITUDE, REQUIRED, "input amplitude"),
        'gain': Key(Kind.FLOAT, REQUIRED, "total gain"),
        'k': Key(Kind.INT, REQUIRED, "stage count"),
    },
    'scheme1': {
        **_FIT_KEYS,
        'a_in': Key(Kind.AMPLITUDE, REQUIRED, "input amplitude"),
        'gain': Key(Kind.FLOAT, REQUIRED, "total gain"),
        'max_stages': Key(Kind.INT, 64, "stage budget"),
        'rel_tol': Key(Kind.FLOAT, 1e-9, "strict-improvement tolerance"),
    },
    'stage-map': {
        **_FIT_KEYS,
        'a_in_grid': Key(Kind.AMPLITUDE_GRID, '2:20:20', "input amplitudes"),
        'gain_grid': Key(Kind.FLOAT_GRID, '1.1:3:20', "total gains"),
        'max_stages': Key(Kind.INT, 64, "stage budget"),
        'precision': Key(Kind.FLOAT, 1e-2, "relative saving a stage must exceed"),
        'workers': Key(Kind.INT, 1, "worker processes"),
    },
}

# Commands whose results depend on the random stream
RANDOMIZED_COMMANDS = frozenset({'gillespie', 'relax'})

# Keys understood by every command
COMMON_KEYS = {'unit'}


@dataclass
class RunConfig:
    """Fully resolved configuration of one run."""
    command: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    output_path: Path = DEFAULT_OUTPUT_DIR
    output_format: OutputFormat = OutputFormat.CSV

    def to_dict(self) -> dict:
        """Convert to dictionary for the run manifest."""
        return {
            'command': self.command,
            'params': self.params,
            'seed': self.seed,
            'output_path': str(self.output_path),
            'output_format': self.output_format.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> 'RunConfig':
        command = d.get('command')
        if command not in COMMAND_SCHEMAS:
            raise ConfigError(f"unknown command {command!r}")
        return cls(
            command=command,
            params=dict(d.get('params', {})),
            seed=d.get('seed'),
            output_path=Path(d.get('output_path', default_output_dir())),
            output_format=OutputFormat(d.get('output_format', OutputFormat.CSV.value)),
        )


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR))


# ============================================================================
# Parsing
# ============================================================================

def parse_lines(text: str, origin: str = '<string>') -> dict[str, str]:
    """Raw key -> value text of a config document."""
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if COMMENT_PATTERN.match(line):
            continue
        match = LINE_PATTERN.match(line)
        if not match:
            raise ConfigError(f"{origin}:{number}: expected 'key = value', got {line.strip()!r}")
        values[match.group('key')] = match.group('value')
    return values


def load_config_file(path: Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_lines(path.read_text(encoding='utf-8'), str(path))


def parse_assignment(text: str) -> tuple[str, str]:
    """One `key=value` from a --set flag."""
    match = LINE_PATTERN.match(text)
    if not match:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    return match.group('key'), match.group('value')


def _to_vt(value: float, unit: Optional[str], default_unit: str) -> float:
    unit = unit or default_unit
    if unit in ('volt', 'V'):
        return DEFAULT_UNITS.volts_to_vt(value)
    return value


def _to_amplitude(value: float, unit: Optional[str], default_unit: str, fit_unit: str) -> float:
    """Amplitude expressed in the unit the selected fit expects."""
    unit = unit or default_unit
    unit = 'volt' if unit == 'V' else unit
    if unit == fit_unit:
        return value
    if fit_unit == 'volt':
        return DEFAULT_UNITS.vt_to_volts(value)
    return DEFAULT_UNITS.volts_to_vt(value)


def _parse_numbers(key: str, text: str) -> tuple[list[float], Optional[str]]:
    """A scalar, comma list or start:stop:count grid, with its unit tag."""
    text = text.strip()
    grid = GRID_PATTERN.match(text)
    if grid:
        count = int(grid.group('count'))
        if count < 1:
            raise ConfigError(f"{key}: grid needs at least one point")
        values = np.linspace(float(grid.group('start')), float(grid.group('stop')), count)
        return [float(v) for v in values], grid.group('unit')
    items = LIST_PATTERN.match(text)
    if items:
        return [float(v) for v in items.group('items').split(',')], items.group('unit')
    raise ConfigError(f"{key}: cannot parse {text!r} as a number, list or start:stop:count grid")


def _resolve_value(key: str, entry: Key, raw: Any, default_unit: str, fit_unit: str) -> Any:
    if not isinstance(raw, str):
        return raw
    if entry.kind is Kind.STR:
        return raw.strip()
    if entry.kind is Kind.INT:
        try:
            return int(float(raw.strip()))
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    values, unit = _parse_numbers(key, raw)
    if entry.kind in (Kind.FLOAT, Kind.VOLTAGE, Kind.AMPLITUDE) and len(values) != 1:
        raise ConfigError(f"{key}: expected a single value, got {raw!r}")
    if entry.kind in (Kind.FLOAT, Kind.FLOAT_GRID) and unit is not None:
        raise ConfigError(f"{key}: unit tag {unit!r} not allowed on a dimensionless value")
    if entry.kind in (Kind.VOLTAGE, Kind.VOLTAGE_GRID):
        values = [_to_vt(v, unit, default_unit) for v in values]
    elif entry.kind in (Kind.AMPLITUDE, Kind.AMPLITUDE_GRID):
        values = [_to_amplitude(v, unit, default_unit, fit_unit) for v in values]
    if entry.kind in (Kind.FLOAT, Kind.VOLTAGE, Kind.AMPLITUDE):
        return values[0]
    return values


def resolve_config(
    command: str,
    raw: dict[str, Any],
    seed: Optional[int] = None,
    output_path: Optional[Path] = None,
    output_format: Optional[str] = None,
    fit_unit: Optional[str] = None,
) -> RunConfig:
    """
    Merge raw values over the command defaults and resolve types and units.

    Args:
        command: Subcommand name
        raw: Key -> value text (file values already overridden by --set)
        seed: Random seed; required for randomized commands
        output_path: Output directory; defaults to $STOCHASTIC_CSVAC_OUTPUT_DIR/<command>
        output_format: 'csv' or 'json'
        fit_unit: Amplitude unit of the selected fit, for fit-driven commands

    Raises:
        ConfigError: unknown command or key, missing key, malformed value
    """
    if command not in COMMAND_SCHEMAS:
        raise ConfigError(f"unknown command {command!r}; choose from {sorted(COMMAND_SCHEMAS)}")
    schema = COMMAND_SCHEMAS[command]
    unknown = set(raw) - set(schema) - COMMON_KEYS
    if unknown:
        raise ConfigError(f"unknown keys for {command}: {', '.join(sorted(unknown))}")
    default_unit = raw.get('unit', 'V_T').strip()
    if default_unit not in ('V_T', 'volt', 'V'):
        raise ConfigError(f"unit must be V_T or volt, got {default_unit!r}")

    params = {}
    for key, entry in schema.items():
        value = raw.get(key, entry.default)
        if value is REQUIRED:
            raise ConfigError(f"{command}: missing required key {key!r}")
        params[key] = _resolve_value(key, entry, value, default_unit, fit_unit or 'V_T')

    if command in RANDOMIZED_COMMANDS and seed is None:
        raise ConfigError(f"{command} needs an explicit --seed")
    try:
        fmt = OutputFormat(output_format or OutputFormat.CSV.value)
    except ValueError:
        raise ConfigError(f"unknown output format {output_format!r}") from None

    return RunConfig(
        command=command,
        params=params,
        seed=seed,
        output_path=Path(output_path) if output_path else default_output_dir() / command,
        output_format=fmt,
    )


def load_manifest_config(path: Path) -> RunConfig:
    """Resolved configuration stored in a previous run's manifest."""
    try:
        manifest = read_json(path)
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read manifest {path}: {e}") from e
    if 'config' not in manifest:
        raise ConfigError(f"{path} is not a run manifest")
    return RunConfig.from_dict(manifest['config'])
