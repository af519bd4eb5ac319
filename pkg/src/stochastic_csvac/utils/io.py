"""
Output helpers: CSV tables with a single comment header, JSON documents and run
manifests.

CSV header lines look like `# a_in [V_T], gain [1], power [kT/bh]`; data rows follow
with floats written by repr so they reload bit-exactly.
"""

import csv
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import orjson  # Faster than stdlib json
import regex as re

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY

HEADER_COLUMN_PATTERN = re.compile(r'^\s*(?P<name>[A-Za-z_][\w\->]*)\s*(?:\[(?P<unit>[^\]]*)\])?\s*$')


def format_header(columns: Sequence[tuple[str, str]]) -> str:
    """Comment header line from (name, unit) pairs."""
    return '# ' + ', '.join(f"{name} [{unit}]" for name, unit in columns)


def _format_cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: Path, columns: Sequence[tuple[str, str]], rows: Iterable[Sequence[Any]]) -> int:
    """
    Write a table with a single `# name [unit], ...` header line.

    Returns:
        Number of data rows written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(format_header(columns) + '\n')
        writer = csv.writer(f, lineterminator='\n')
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} cells, header has {len(columns)}")
            writer.writerow([_format_cell(v) for v in row])
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return count


def read_csv(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    """
    Read a table written by write_csv.

    Returns:
        Column names and one dict per data row (cells kept as strings)
    """
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as f:
        header = f.readline()
        if not header.startswith('#'):
            raise ValueError(f"{path}: missing '# name [unit], ...' header line")
        names = []
        for cell in header[1:].split(','):
            match = HEADER_COLUMN_PATTERN.match(cell)
            if not match:
                raise ValueError(f"{path}: malformed header column {cell.strip()!r}")
            names.append(match.group('name'))
        rows = [dict(zip(names, row)) for row in csv.reader(f) if row]
    return names, rows


def write_json(path: Path, document: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(orjson.dumps(document, option=JSON_OPTIONS))
        f.write(b'\n')


def read_json(path: Path) -> Any:
    with open(path, 'rb') as f:
        return orjson.loads(f.read())


def build_manifest(
    command: str,
    config: dict[str, Any],
    seed: Optional[int],
    version: str,
    wall_time_seconds: float,
    outputs: Sequence[Path],
    rng_algorithm: Optional[str] = None,
) -> dict[str, Any]:
    """Reproducibility record of one run."""
    return {
        'command': command,
        'config': config,
        'seed': seed,
        'rng_algorithm': rng_algorithm,
        'version': version,
        'wall_time_seconds': wall_time_seconds,
        'outputs': [str(p) for p in outputs],
    }
