"""
Exponential power law P = exp(a + b*A_in + c*G) of the CSVAC.

Fits are ordinary least squares of ln P on (1, A_in, G); RMSE and R-square are
reported on the ln scale, where the model is linear. Two coefficient sets ship
built in: the simulated CSVAC (amplitudes in V_T) and the bench CSVAC built from
physical transistors (amplitudes in volts).
"""

import logging
import math
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from ..utils.io import read_csv
from .errors import FitError, ThermoDomainError

logger = logging.getLogger(__name__)

# Column names accepted in a power sample table
AMPLITUDE_COLUMNS = ('a_in', 'a_in_vt')
POWER_COLUMNS = ('power', 'avg_power_kt_per_unit_time')


class AmplitudeUnit(Enum):
    VT = "V_T"
    VOLT = "volt"


@dataclass(frozen=True)
class PowerFit:
    """Coefficients of the exponential power law with fit metrics."""
    a: float
    b: float
    c: float
    amplitude_unit: AmplitudeUnit = AmplitudeUnit.VT
    rmse: Optional[float] = None
    r_square: Optional[float] = None
    n_points: Optional[int] = None
    source: str = "fit"

    def __post_init__(self):
        if self.r_square is not None and not 0.0 <= self.r_square <= 1.0:
            raise ThermoDomainError(f"r_square must lie in [0, 1], got {self.r_square}")
        if self.n_points is not None and self.n_points < 3:
            raise ThermoDomainError(f"a fit needs at least 3 points, got {self.n_points}")

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        d = asdict(self)
        d['amplitude_unit'] = self.amplitude_unit.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> 'PowerFit':
        return cls(
            a=float(d['a']),
            b=float(d['b']),
            c=float(d['c']),
            amplitude_unit=AmplitudeUnit(d.get('amplitude_unit', AmplitudeUnit.VT.value)),
            rmse=d.get('rmse'),
            r_square=d.get('r_square'),
            n_points=d.get('n_points'),
            source=d.get('source', 'fit'),
        )


BUILTIN_FITS = {
    'simulation': PowerFit(-18.7, 0.8156, 8.569, AmplitudeUnit.VT,
                           rmse=0.06571, r_square=0.9993, source='simulation'),
    'entity': PowerFit(-50.5, 1.415, 33.49, AmplitudeUnit.VOLT, source='entity'),
}


def builtin_fit(name: str) -> PowerFit:
    try:
        return BUILTIN_FITS[name]
    except KeyError:
        raise ThermoDomainError(
            f"unknown built-in fit {name!r}; choose from {sorted(BUILTIN_FITS)}"
        ) from None


def evaluate_power(fit: PowerFit, a_in: float, g: float) -> float:
    """
    exp(a + b*A_in + c*G).

    Args:
        fit: Coefficient set
        a_in: Input amplitude in fit.amplitude_unit
        g: Voltage gain, at least 1
    """
    if g < 1:
        raise ThermoDomainError(f"gain must be >= 1, got {g}")
    if a_in < 0:
        raise ThermoDomainError(f"a_in must be >= 0, got {a_in}")
    return math.exp(fit.a + fit.b * a_in + fit.c * g)


def fit_power_model(
    samples: Iterable[Sequence[float]],
    amplitude_unit: AmplitudeUnit = AmplitudeUnit.VT,
    source: str = "fit",
) -> PowerFit:
    """
    Least-squares fit of ln P on (1, A_in, G).

    Args:
        samples: (a_in, g, p) triples with p > 0
        amplitude_unit: Unit of the a_in column
        source: Label stored with the fit

    Raises:
        ThermoDomainError: fewer than 3 samples or a non-positive power
        FitError: the (A_in, G) design is collinear
    """
    data = np.asarray(list(samples), dtype=float)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ThermoDomainError("samples must be (a_in, g, p) triples")
    if len(data) < 3:
        raise ThermoDomainError(f"need at least 3 samples, got {len(data)}")
    if np.any(data[:, 2] <= 0):
        raise ThermoDomainError("power samples must be positive")

    design = np.column_stack([np.ones(len(data)), data[:, 0], data[:, 1]])
    if np.linalg.matrix_rank(design) < 3:
        raise FitError("design matrix is rank deficient (collinear A_in and G)")
    y = np.log(data[:, 2])
    (a, b, c), *_ = np.linalg.lstsq(design, y, rcond=None)

    residuals = y - design @ np.array([a, b, c])
    ss_res = float(residuals @ residuals)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_square = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r_square = min(max(r_square, 0.0), 1.0)
    rmse = math.sqrt(ss_res / len(data))

    logger.info(f"Fitted a={a:.4f}, b={b:.4f}, c={c:.4f} on {len(data)} points (R^2={r_square:.5f})")
    return PowerFit(float(a), float(b), float(c), amplitude_unit,
                    rmse=rmse, r_square=r_square, n_points=len(data), source=source)


def entity_power(v_d: float, supply_current: float) -> float:
    """Bench dissipation 2*V_d*J_D of a CSVAC between symmetric supplies +-V_d."""
    if v_d <= 0:
        raise ThermoDomainError(f"v_d must be positive, got {v_d}")
    return 2.0 * v_d * supply_current


def load_power_samples(path: Path) -> list[tuple[float, float, float]]:
    """
    (a_in, gain, power) triples from a CSV table.

    Accepts the power-map layout (`a_in_vt`, `avg_power_kt_per_unit_time`) as well as
    plain `a_in`, `power` columns; rows with an empty power cell (unreachable gains)
    are skipped.
    """
    names, rows = read_csv(path)
    amplitude_column = next((c for c in AMPLITUDE_COLUMNS if c in names), None)
    power_column = next((c for c in POWER_COLUMNS if c in names), None)
    if amplitude_column is None or 'gain' not in names or power_column is None:
        raise ThermoDomainError(
            f"{path}: need one of {AMPLITUDE_COLUMNS}, gain and one of {POWER_COLUMNS}")
    samples = []
    for row in rows:
        if not row.get(power_column):
            continue
        samples.append((float(row[amplitude_column]), float(row['gain']), float(row[power_column])))
    logger.debug(f"Loaded {len(samples)} power samples from {path}")
    return samples
