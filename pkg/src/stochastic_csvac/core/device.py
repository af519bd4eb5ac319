"""
Single-level transistor model.

A transistor is one electron level that holds zero or one electron (Coulomb
blockade). The gate voltage shifts the level, electrodes are reservoirs with a
fixed chemical potential, and electrons hop between level and reservoirs with
Fermi-Dirac weighted rates. The resulting two-state master equation gives the
steady-state occupancy and the electrode currents.

Generators follow the column convention: entry [to, from] holds the rate of the
from -> to transition and every column sums to zero. State 0 is the empty level,
state 1 the occupied one.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .distributions import fermi_dirac
from .errors import SolverError, ThermoDomainError

logger = logging.getLogger(__name__)

# Fraction of the sweep's peak current below which the device counts as cut off
PINCH_OFF_FRACTION = 0.01

# Default gate grid for transfer sweeps: -10 .. 10 V_T in 0.5 V_T steps
DEFAULT_GATE_GRID = tuple(np.linspace(-10.0, 10.0, 41))


class TransistorKind(Enum):
    """Channel type; decides the sign of the gate coupling."""
    NMOS = "NMOS"
    PMOS = "PMOS"


@dataclass(frozen=True)
class TransistorLevel:
    """A gate-controlled single electron level."""
    kind: TransistorKind
    reference_energy: float = 0.0
    escape_rate: float = 0.2

    def __post_init__(self):
        if not self.escape_rate > 0:
            raise ThermoDomainError(f"escape_rate must be positive, got {self.escape_rate}")


@dataclass(frozen=True)
class Reservoir:
    """An electrode held at a fixed chemical potential (kT)."""
    label: str
    chemical_potential: float

    def __post_init__(self):
        if not np.isfinite(self.chemical_potential):
            raise ThermoDomainError(f"reservoir {self.label} has non-finite potential")


class ElectrodeRates(NamedTuple):
    k_in: float   # reservoir -> level
    k_out: float  # level -> reservoir


@dataclass(frozen=True)
class Channel:
    """
    One elementary transition of a chain.

    delta is +1 when an electron enters the system from reservoir `label`,
    -1 when it leaves into it, and 0 for internal moves.
    """
    source: int
    target: int
    rate: float
    label: str
    delta: int = 0


@dataclass
class RateMatrix:
    """Generator of a continuous-time Markov chain, with its channel decomposition."""
    entries: np.ndarray
    channels: tuple[Channel, ...] = ()
    state_labels: tuple[str, ...] = ()

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        n = self.entries.shape[0]
        if self.entries.shape != (n, n):
            raise ThermoDomainError(f"generator must be square, got {self.entries.shape}")
        off_diagonal = self.entries[~np.eye(n, dtype=bool)]
        if np.any(off_diagonal < 0):
            raise ThermoDomainError("generator has negative off-diagonal rates")
        scale = max(1.0, float(np.max(np.abs(self.entries))))
        if np.max(np.abs(self.entries.sum(axis=0))) > 1e-12 * scale:
            raise ThermoDomainError("generator columns do not sum to zero")
        if not self.channels:
            self.channels = tuple(
                Channel(j, i, float(self.entries[i, j]), f"{j}->{i}")
                for j in range(n) for i in range(n)
                if i != j and self.entries[i, j] > 0
            )

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_channels(
        cls,
        dimension: int,
        channels: Sequence[Channel],
        state_labels: tuple[str, ...] = (),
    ) -> 'RateMatrix':
        """Assemble the generator by summing channel rates; diagonals close the columns."""
        entries = np.zeros((dimension, dimension))
        for ch in channels:
            entries[ch.target, ch.source] += ch.rate
        np.fill_diagonal(entries, 0.0)
        np.fill_diagonal(entries, -entries.sum(axis=0))
        return cls(entries, tuple(channels), state_labels)


@dataclass
class SteadyState:
    """Stationary distribution of a generator and per-level mean occupancies."""
    occupation_probabilities: np.ndarray
    mean_occupancy_per_level: dict[str, float] = field(default_factory=dict)

    @property
    def mean_occupancy(self) -> float:
        """Occupancy of the only level of a two-state chain."""
        if len(self.mean_occupancy_per_level) != 1:
            raise ValueError("mean_occupancy is only defined for single-level chains")
        return next(iter(self.mean_occupancy_per_level.values()))


def level_energy(t: TransistorLevel, v_in: float) -> float:
    """Level energy in kT: NMOS falls with the gate voltage, PMOS rises."""
    if t.kind is TransistorKind.NMOS:
        return t.reference_energy - v_in
    return t.reference_energy + v_in


def electrode_rates(level_energy: float, r: Reservoir, gamma: float) -> ElectrodeRates:
    """
    Hopping rates between a level and one reservoir.

    k_in = gamma*f(eps, mu), k_out = gamma*(1 - f(eps, mu)); the complement is taken
    through expit directly so both rates keep full relative precision.
    """
    if not gamma > 0:
        raise ThermoDomainError(f"gamma must be positive, got {gamma}")
    f_in = fermi_dirac(level_energy, r.chemical_potential)
    f_out = float(expit(level_energy - r.chemical_potential))
    return ElectrodeRates(gamma * f_in, gamma * f_out)


def build_two_state_generator(
    level: TransistorLevel,
    v_in: float,
    reservoirs: Sequence[Reservoir],
) -> RateMatrix:
    """Generator of one level coupled to every reservoir in `reservoirs`."""
    if not reservoirs:
        raise ThermoDomainError("at least one reservoir is required")
    eps = level_energy(level, v_in)
    channels = []
    for r in reservoirs:
        k_in, k_out = electrode_rates(eps, r, level.escape_rate)
        channels.append(Channel(0, 1, k_in, r.label, +1))
        channels.append(Channel(1, 0, k_out, r.label, -1))
    return RateMatrix.from_channels(2, channels, ("empty", "occupied"))


def steady_state(
    m: RateMatrix,
    level_masks: Optional[dict[str, Sequence[int]]] = None,
) -> SteadyState:
    """
    Normalized null vector of a generator.

    Solves [R; 1^T] p = [0; 1] by least squares. `level_masks` maps a level name to
    the states in which that level is occupied; by default the chain is read as a
    single level occupied in state 1.

    Raises:
        SolverError: if the generator has more than one null direction
    """
    n = m.dimension
    augmented = np.vstack([m.entries, np.ones((1, n))])
    if np.linalg.matrix_rank(augmented) < n:
        raise SolverError(
            "generator has more than one stationary direction",
            {'dimension': n, 'singular_values': np.linalg.svd(m.entries, compute_uv=False).tolist()},
        )
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    p, *_ = np.linalg.lstsq(augmented, rhs, rcond=None)
    p = np.clip(p, 0.0, None)
    p /= p.sum()

    if level_masks is None:
        level_masks = {'level': [1]} if n == 2 else {}
    occupancies = {name: float(p[list(states)].sum()) for name, states in level_masks.items()}
    return SteadyState(p, occupancies)


def two_state_occupancy(eps: float, reservoirs: Sequence[Reservoir], gamma: float) -> float:
    """Closed form k_in_total/(k_in_total + k_out_total) of the two-state chain."""
    rates = [electrode_rates(eps, r, gamma) for r in reservoirs]
    k_in = sum(k.k_in for k in rates)
    k_out = sum(k.k_out for k in rates)
    return k_in / (k_in + k_out)


def current_into_level(eps: float, mu: float, gamma: float, mean_occupancy: float) -> float:
    """k_in*(1 - <n>) - k_out*<n> for a level at eps and a reservoir at mu."""
    k_in, k_out = electrode_rates(eps, Reservoir('_', mu), gamma)
    return k_in * (1.0 - mean_occupancy) - k_out * mean_occupancy


def electrode_current(
    level: TransistorLevel,
    r: Reservoir,
    mean_occupancy: float,
    v_in: float = 0.0,
) -> float:
    """
    Net electron current from reservoir `r` into the level, in q/(beta*hbar).

    Zero at single-reservoir equilibrium; the currents of all reservoirs into one
    level sum to zero at steady state.
    """
    if not 0.0 <= mean_occupancy <= 1.0:
        raise ThermoDomainError(f"mean_occupancy must lie in [0, 1], got {mean_occupancy}")
    return current_into_level(level_energy(level, v_in), r.chemical_potential,
                              level.escape_rate, mean_occupancy)


def drain_current(level: TransistorLevel, v_in: float, v_ds: float) -> float:
    """
    Drain current i_D with the source at mu = 0 and the drain at mu = -v_ds.

    Reported as the electron current entering the level from the source, which is
    the current that leaves through the drain at steady state.
    """
    source = Reservoir('s', 0.0)
    drain = Reservoir('d', -v_ds)
    state = steady_state(build_two_state_generator(level, v_in, [drain, source]))
    return electrode_current(level, source, state.mean_occupancy, v_in)


@dataclass
class CharacteristicPoint:
    v_in: float
    v_ds: float
    i_d: float


@dataclass
class TransferCharacteristic:
    """Drain current versus gate voltage at fixed drain bias."""
    kind: TransistorKind
    v_d: float
    points: list[CharacteristicPoint]
    pinch_off: Optional[float]
    saturation_current: float


@dataclass
class OutputCharacteristic:
    """Family of drain current versus drain-source voltage curves."""
    kind: TransistorKind
    curves: dict[float, list[CharacteristicPoint]]
    saturation_currents: dict[float, float]
    pinch_off: Optional[float]

    def pre_pinch_off_boundary(self, v_in: float) -> Optional[float]:
        """v_ds on the pre-pinch-off trajectory for gate voltage v_in."""
        if self.pinch_off is None:
            return None
        if self.kind is TransistorKind.NMOS:
            return v_in - self.pinch_off
        return self.pinch_off - v_in

    @property
    def points(self) -> list[CharacteristicPoint]:
        return [p for v_in in sorted(self.curves) for p in self.curves[v_in]]


def find_pinch_off(
    level: TransistorLevel,
    v_d: float,
    points: Sequence[CharacteristicPoint],
    fraction: float = PINCH_OFF_FRACTION,
) -> Optional[float]:
    """
    Gate voltage where |i_D| first rises above `fraction` of the sweep's peak.

    Scans from the cut-off side (low gate voltage for NMOS, high for PMOS) for the
    first grid interval that crosses the threshold and solves for the crossing on
    the exact current, so the result does not depend on the grid spacing. None when
    the first point already conducts or the sweep never crosses.
    """
    ordered = sorted(points, key=lambda p: p.v_in, reverse=level.kind is TransistorKind.PMOS)
    threshold = fraction * max(abs(p.i_d) for p in ordered)
    if abs(ordered[0].i_d) > threshold:
        return None
    for below, above in zip(ordered, ordered[1:]):
        if abs(above.i_d) > threshold:
            return float(brentq(lambda v: abs(drain_current(level, v, v_d)) - threshold,
                                below.v_in, above.v_in, xtol=1e-12))
    return None


def sweep_transfer_characteristic(
    level: TransistorLevel,
    v_d: float,
    v_in_grid: Sequence[float] = DEFAULT_GATE_GRID,
) -> TransferCharacteristic:
    """Drain current over a gate grid at drain bias v_d, with the pinch-off read-out."""
    if len(v_in_grid) == 0:
        raise ThermoDomainError("gate grid is empty")
    points = [CharacteristicPoint(float(v), v_d, drain_current(level, float(v), v_d))
              for v in v_in_grid]
    pinch_off = find_pinch_off(level, v_d, points)
    saturation = max(abs(p.i_d) for p in points)
    logger.debug(f"{level.kind.value} transfer sweep: pinch-off {pinch_off}, peak {saturation:.4g}")
    return TransferCharacteristic(level.kind, v_d, points, pinch_off, saturation)


def sweep_output_characteristic(
    level: TransistorLevel,
    v_in_values: Sequence[float],
    v_ds_grid: Sequence[float],
    pinch_off: Optional[float] = None,
) -> OutputCharacteristic:
    """
    Drain current over a drain-source grid for each gate voltage.

    The saturation current of a curve is i_D at the largest |v_ds|. When
    `pinch_off` is not given it is read from a transfer sweep at the largest bias.
    """
    if len(v_in_values) == 0 or len(v_ds_grid) == 0:
        raise ThermoDomainError("output sweep grids must be non-empty")
    curves = {}
    saturation = {}
    v_ds_far = max(v_ds_grid, key=abs)
    for v_in in v_in_values:
        v_in = float(v_in)
        curve = [CharacteristicPoint(v_in, float(v), drain_current(level, v_in, float(v)))
                 for v in v_ds_grid]
        curves[v_in] = curve
        saturation[v_in] = next(p.i_d for p in curve if p.v_ds == float(v_ds_far))
    if pinch_off is None:
        pinch_off = sweep_transfer_characteristic(level, abs(float(v_ds_far))).pinch_off
    return OutputCharacteristic(level.kind, curves, saturation, pinch_off)
