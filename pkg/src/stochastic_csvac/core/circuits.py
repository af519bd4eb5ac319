"""
Self-consistent steady states of the two amplifier circuits.

Single-NMOS amplifier: a drain resistor ties the output node to the supply
V_DD, the NMOS level connects the output node to the grounded source. The
output voltage is the V_out that balances the resistor current against the
transistor drain current.

CSVAC: a PMOS level (drain at +V_d) and an NMOS level (drain at -V_d) share the
source node, which drives a grounded load. Both levels are solved jointly as a
four-state chain over (n_P, n_N), with the level-to-level exchange included,
and the output voltage balances the load current against the transistor
currents into the source node.

Sign conventions: every current counts electrons, chemical potentials are
mu = -q*V, so a node at positive voltage sits at negative mu.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

try:
    from tqdm import tqdm
except ImportError:
    tqdm = None

from .device import (
    Channel,
    RateMatrix,
    Reservoir,
    TransistorKind,
    TransistorLevel,
    build_two_state_generator,
    current_into_level,
    electrode_current,
    electrode_rates,
    level_energy,
    steady_state,
)
from .distributions import bose_einstein, fermi_dirac
from .errors import CapabilityError, SolverError, ThermoDomainError

logger = logging.getLogger(__name__)

# Ohm's-law fit of the drain resistor: R_d = RD_COEFFICIENT / gamma_r
RD_COEFFICIENT = 8.432

# Root-equation residual every returned state must satisfy (q/(beta*hbar))
BALANCE_TOLERANCE = 1e-9

# Joint CSVAC states, indexed n_P + 2*n_N
CSVAC_STATES = ("(0,0)", "(1,0)", "(0,1)", "(1,1)")
CSVAC_LEVEL_MASKS = {'P': (1, 3), 'N': (2, 3)}

DEFAULT_PERIOD_SAMPLES = 32
MIN_PERIOD_SAMPLES = 16


# ============================================================================
# Configurations and results
# ============================================================================

@dataclass(frozen=True)
class AmplifierConfig:
    """Single-NMOS amplifier. The default bias puts the gate at the pinch-off edge."""
    v_dd: float = 15.0
    gamma: float = 0.2
    gamma_r: float = 0.01
    nmos_reference_energy: float = 5.0

    def __post_init__(self):
        if not self.v_dd > 0:
            raise ThermoDomainError(f"v_dd must be positive, got {self.v_dd}")
        if not (self.gamma > 0 and self.gamma_r > 0):
            raise ThermoDomainError("escape rates must be positive")

    @property
    def nmos(self) -> TransistorLevel:
        return TransistorLevel(TransistorKind.NMOS, self.nmos_reference_energy, self.gamma)


@dataclass(frozen=True)
class CsvacConfig:
    """CSVAC with symmetric supplies. The NMOS reference energy defaults to q*V_d."""
    v_d: float = 15.0
    gamma: float = 0.2
    gamma_l: float = 0.01
    nmos_reference_energy: Optional[float] = None
    pmos_reference_energy: float = 0.0

    def __post_init__(self):
        if not self.v_d > 0:
            raise ThermoDomainError(f"v_d must be positive, got {self.v_d}")
        if not (self.gamma > 0 and self.gamma_l > 0):
            raise ThermoDomainError("escape rates must be positive")
        if self.nmos_reference_energy is None:
            object.__setattr__(self, 'nmos_reference_energy', self.v_d)

    @property
    def pmos(self) -> TransistorLevel:
        return TransistorLevel(TransistorKind.PMOS, self.pmos_reference_energy, self.gamma)

    @property
    def nmos(self) -> TransistorLevel:
        return TransistorLevel(TransistorKind.NMOS, self.nmos_reference_energy, self.gamma)

    def potentials(self, v_out: float) -> dict[str, float]:
        """Chemical potentials of PMOS drain, NMOS drain, source node and ground."""
        return {'dP': -self.v_d, 'dN': self.v_d, 's': -v_out, 'g': 0.0}


@dataclass
class CircuitState:
    """Solved steady state of a circuit at one input voltage."""
    v_in: float
    v_out: float
    occupancies: dict[str, float]
    currents: dict[str, float]
    potentials: dict[str, float]
    power: float
    residual: float
    clamped: bool = False
    ohm_v_out: Optional[float] = None


class PowerBreakdown(NamedTuple):
    total: float
    pmos: float
    nmos: float


@dataclass
class WaveformSample:
    tau: float
    v_in: float
    v_out: float
    power: float = 0.0


@dataclass
class GainMeasurement:
    """Amplitude ratio of one quasi-static sinusoid period."""
    input_amplitude: float
    output_amplitude: float
    gain: float
    waveform: list[WaveformSample] = field(default_factory=list)

    @property
    def average_power(self) -> float:
        return float(np.mean([s.power for s in self.waveform]))


@dataclass
class PowerMapCell:
    a_in: float
    gain: float
    gamma: Optional[float]
    avg_power: Optional[float]
    reachable: bool


# ============================================================================
# Resistors and balance solving
# ============================================================================

def resistor_current(mu_node: float, mu_supply: float, gamma_r: float) -> float:
    """
    Electron current from a supply into a node through a resistor.

    (gamma_r/2)*[f(mu_node; mu_supply) - 1/2]: the supply's occupation at the node's
    potential minus the node's own half filling. Zero when the potentials match.
    """
    if not gamma_r > 0:
        raise ThermoDomainError(f"gamma_r must be positive, got {gamma_r}")
    return 0.5 * gamma_r * (fermi_dirac(mu_node, mu_supply) - 0.5)


def rd_from_gamma(gamma_r: float) -> float:
    """Drain resistance equivalent to a resistor escape rate."""
    if not gamma_r > 0:
        raise ThermoDomainError(f"gamma_r must be positive, got {gamma_r}")
    return RD_COEFFICIENT / gamma_r


def _solve_balance(
    balance: Callable[[float], float],
    lo: float,
    hi: float,
    what: str,
) -> float:
    """Root of a continuous balance function on [lo, hi] by Brent's bisection/secant."""
    f_lo, f_hi = balance(lo), balance(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise SolverError(
            f"{what}: no sign change of the balance in [{lo}, {hi}]",
            {'bracket': (lo, hi), 'balance_at_bracket': (f_lo, f_hi)},
        )
    root = brentq(balance, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
    residual = abs(balance(root))
    if residual > BALANCE_TOLERANCE:
        raise SolverError(f"{what}: residual {residual:.3g} above tolerance",
                          {'root': root, 'residual': residual})
    return root


# ============================================================================
# Single-NMOS amplifier
# ============================================================================

def _amplifier_currents(cfg: AmplifierConfig, v_in: float, v_out: float) -> tuple[float, float, float]:
    """(J_DD->Rd, J_d->N, <n_N>) at a trial output voltage."""
    drain = Reservoir('d', -v_out)
    source = Reservoir('s', 0.0)
    level = cfg.nmos
    n = steady_state(build_two_state_generator(level, v_in, [drain, source])).mean_occupancy
    j_resistor = resistor_current(-v_out, -cfg.v_dd, cfg.gamma_r)
    j_transistor = electrode_current(level, drain, n, v_in)
    return j_resistor, j_transistor, n


def solve_amplifier(cfg: AmplifierConfig, v_in: float) -> CircuitState:
    """
    Output voltage of the single-NMOS amplifier at gate voltage v_in.

    Solves J_DD->Rd(V_out) = J_d->N(V_out) on [0, V_DD] and reports the Ohm's-law
    estimate V_DD + J_d->N * R_d next to the solved value.
    """
    def balance(v_out: float) -> float:
        j_resistor, j_transistor, _ = _amplifier_currents(cfg, v_in, v_out)
        return j_resistor - j_transistor

    v_out = _solve_balance(balance, 0.0, cfg.v_dd, f"amplifier at v_in={v_in}")
    j_resistor, j_transistor, n = _amplifier_currents(cfg, v_in, v_out)
    # Electrons crossing the transistor from source (mu = 0) to drain (mu = -V_out)
    power = -j_transistor * v_out
    return CircuitState(
        v_in=v_in,
        v_out=v_out,
        occupancies={'N': n},
        currents={'J_DD->Rd': j_resistor, 'J_d->N': j_transistor},
        potentials={'d': -v_out, 's': 0.0, 'DD': -cfg.v_dd},
        power=power,
        residual=abs(j_resistor - j_transistor),
        ohm_v_out=cfg.v_dd + j_transistor * rd_from_gamma(cfg.gamma_r),
    )


def estimate_drain_resistance(cfg: AmplifierConfig, v_in: float = 0.0) -> float:
    """Ohm's-law resistance (V_DD - V_out)/|J| of a solved amplifier state."""
    state = solve_amplifier(cfg, v_in)
    current = abs(state.currents['J_d->N'])
    if current == 0.0:
        raise SolverError("no drain current; resistance undefined", {'v_in': v_in})
    return (cfg.v_dd - state.v_out) / current


def sweep_amplifier_transfer(cfg: AmplifierConfig, v_in_grid: Sequence[float]) -> list[CircuitState]:
    """Static input-output curve of the amplifier."""
    return [solve_amplifier(cfg, float(v)) for v in v_in_grid]


def amplifier_waveform(
    cfg: AmplifierConfig,
    amplitude: float = 0.1,
    omega: float = 0.5,
    samples: int = 64,
    periods: int = 1,
) -> list[WaveformSample]:
    """Quasi-static response to v_in = amplitude*sin(omega*tau)."""
    period = 2 * math.pi / omega
    taus = np.arange(samples * periods) * period / samples
    waveform = []
    for tau in taus:
        v_in = amplitude * math.sin(omega * tau)
        state = solve_amplifier(cfg, v_in)
        waveform.append(WaveformSample(float(tau), v_in, state.v_out, state.power))
    return waveform


# ============================================================================
# CSVAC
# ============================================================================

class ExchangeRates(NamedTuple):
    k_pn: float    # N -> P
    k_np: float    # P -> N
    clamped: bool


def inter_transistor_rates(eps_p: float, eps_n: float, gamma: float) -> ExchangeRates:
    """
    Level-to-level transfer rates with Bose-Einstein weights.

    Downhill transfers carry gamma*(1 + o), uphill ones gamma*o, with o evaluated at
    the level gap. Equal levels fall into the clamped branch.
    """
    if not gamma > 0:
        raise ThermoDomainError(f"gamma must be positive, got {gamma}")
    if eps_p > eps_n:
        o, clamped = bose_einstein(eps_p - eps_n)
        return ExchangeRates(gamma * o, gamma * (1.0 + o), clamped)
    o, clamped = bose_einstein(eps_n - eps_p)
    return ExchangeRates(gamma * (1.0 + o), gamma * o, clamped)


def build_joint_generator(
    eps_p: float,
    eps_n: float,
    reservoirs_p: Sequence[Reservoir],
    reservoirs_n: Sequence[Reservoir],
    gamma: float,
    exchange: bool = True,
) -> tuple[RateMatrix, bool]:
    """
    Four-state generator of two levels with independent electrodes and exchange.

    Returns the generator and whether the exchange rates were clamped.
    """
    channels = []
    for n_n in (0, 1):
        for r in reservoirs_p:
            k_in, k_out = electrode_rates(eps_p, r, gamma)
            label = f"{r.label}->P"
            channels.append(Channel(2 * n_n, 2 * n_n + 1, k_in, label, +1))
            channels.append(Channel(2 * n_n + 1, 2 * n_n, k_out, label, -1))
    for n_p in (0, 1):
        for r in reservoirs_n:
            k_in, k_out = electrode_rates(eps_n, r, gamma)
            label = f"{r.label}->N"
            channels.append(Channel(n_p, n_p + 2, k_in, label, +1))
            channels.append(Channel(n_p + 2, n_p, k_out, label, -1))
    clamped = False
    if exchange:
        k_pn, k_np, clamped = inter_transistor_rates(eps_p, eps_n, gamma)
        channels.append(Channel(1, 2, k_np, 'P->N'))
        channels.append(Channel(2, 1, k_pn, 'N->P'))
    return RateMatrix.from_channels(4, channels, CSVAC_STATES), clamped


def _csvac_reservoirs(cfg: CsvacConfig, v_out: float) -> tuple[list[Reservoir], list[Reservoir]]:
    mu = cfg.potentials(v_out)
    source = Reservoir('s', mu['s'])
    return [Reservoir('dP', mu['dP']), source], [Reservoir('dN', mu['dN']), source]


def build_csvac_generator(
    cfg: CsvacConfig,
    v_in: float,
    v_out: float,
    exchange: bool = True,
) -> RateMatrix:
    """Joint (n_P, n_N) generator of the CSVAC at the given input and output voltages."""
    res_p, res_n = _csvac_reservoirs(cfg, v_out)
    generator, _ = build_joint_generator(
        level_energy(cfg.pmos, v_in), level_energy(cfg.nmos, v_in),
        res_p, res_n, cfg.gamma, exchange,
    )
    return generator


def csvac_operating_point(cfg: CsvacConfig, v_in: float, v_out: float) -> CircuitState:
    """Currents, occupancies and power of the CSVAC at a trial output voltage."""
    eps_p = level_energy(cfg.pmos, v_in)
    eps_n = level_energy(cfg.nmos, v_in)
    res_p, res_n = _csvac_reservoirs(cfg, v_out)
    generator, clamped = build_joint_generator(eps_p, eps_n, res_p, res_n, cfg.gamma)
    state = steady_state(generator, CSVAC_LEVEL_MASKS)
    n_p = state.mean_occupancy_per_level['P']
    n_n = state.mean_occupancy_per_level['N']
    mu = cfg.potentials(v_out)

    j_dp = current_into_level(eps_p, mu['dP'], cfg.gamma, n_p)
    j_sp = current_into_level(eps_p, mu['s'], cfg.gamma, n_p)
    j_dn = current_into_level(eps_n, mu['dN'], cfg.gamma, n_n)
    j_sn = current_into_level(eps_n, mu['s'], cfg.gamma, n_n)
    # Load current leaves the source node into ground
    j_load = resistor_current(mu['g'], mu['s'], cfg.gamma_l)

    currents = {
        'J_dP->P': j_dp,
        'J_dN->N': j_dn,
        'J_P->s': -j_sp,
        'J_N->s': -j_sn,
        'J_CSVAC->RL': j_load,
    }
    circuit = CircuitState(
        v_in=v_in,
        v_out=v_out,
        occupancies={'P': n_p, 'N': n_n},
        currents=currents,
        potentials=mu,
        power=0.0,
        residual=abs(j_load - (currents['J_P->s'] + currents['J_N->s'])),
        clamped=clamped,
    )
    circuit.power = power_dissipation(circuit).total
    return circuit


def solve_csvac(cfg: CsvacConfig, v_in: float) -> CircuitState:
    """
    Output voltage of the CSVAC at input v_in.

    Solves J_CSVAC->RL(V_out) = J_P->s(V_out) + J_N->s(V_out) on [-V_d, V_d].
    """
    def balance(v_out: float) -> float:
        state = csvac_operating_point(cfg, v_in, v_out)
        c = state.currents
        return c['J_CSVAC->RL'] - (c['J_P->s'] + c['J_N->s'])

    v_out = _solve_balance(balance, -cfg.v_d, cfg.v_d, f"CSVAC at v_in={v_in}")
    return csvac_operating_point(cfg, v_in, v_out)


def power_dissipation(state: CircuitState) -> PowerBreakdown:
    """
    Dissipated power of a solved CSVAC state.

    Each drain current times the potential drop along the electron path from that
    drain to the source node; the sum is the steady-state entropy production.
    """
    mu = state.potentials
    pmos = state.currents['J_dP->P'] * (mu['dP'] - mu['s'])
    nmos = state.currents['J_dN->N'] * (mu['dN'] - mu['s'])
    return PowerBreakdown(pmos + nmos, pmos, nmos)


def sweep_csvac_transfer(cfg: CsvacConfig, v_in_grid: Sequence[float]) -> list[CircuitState]:
    """Deterministic input-output curve of the CSVAC."""
    return [solve_csvac(cfg, float(v)) for v in v_in_grid]


def csvac_waveform(
    cfg: CsvacConfig,
    amplitude: float = -2.5,
    omega: float = 1.0 / 3.0,
    samples: int = 64,
    periods: int = 1,
) -> list[WaveformSample]:
    """Quasi-static CSVAC response to v_in = amplitude*sin(omega*tau)."""
    period = 2 * math.pi / omega
    taus = np.arange(samples * periods) * period / samples
    v_ins = [amplitude * math.sin(omega * tau) for tau in taus]
    states = _solve_unique(cfg, v_ins, "waveform")
    return [WaveformSample(float(tau), v, s.v_out, s.power) for tau, v, s in zip(taus, v_ins, states)]


def _solve_unique(cfg: CsvacConfig, v_ins: Sequence[float], what: str) -> list[CircuitState]:
    """Solve each distinct input once; a sinusoid repeats most of its values."""
    cache: dict[float, CircuitState] = {}
    states = []
    for phase, v_in in enumerate(v_ins):
        key = round(v_in, 12)
        if key not in cache:
            try:
                cache[key] = solve_csvac(cfg, v_in)
            except SolverError as e:
                raise SolverError(f"{what}: sample {phase} (v_in={v_in:.6g}) failed: {e}",
                                  {'phase_index': phase, 'v_in': v_in, **e.diagnostics}) from e
        states.append(cache[key])
    return states


def _period_inputs(a_in: float, period_samples: int, phase: float) -> list[float]:
    return [a_in * math.sin(2 * math.pi * k / period_samples + phase)
            for k in range(period_samples)]


def measure_gain(
    cfg: CsvacConfig,
    a_in: float,
    period_samples: int = DEFAULT_PERIOD_SAMPLES,
    phase: float = 0.0,
) -> GainMeasurement:
    """
    Voltage gain over one quasi-static period of A_in*sin(2*pi*tau/T).

    A_out = (max V_out - min V_out)/2 and G = A_out/A_in. Sample counts divisible by
    four include both sinusoid extremes.

    Raises:
        SolverError: naming the phase sample that failed to solve
    """
    if not a_in > 0:
        raise ThermoDomainError(f"a_in must be positive, got {a_in}")
    if period_samples < MIN_PERIOD_SAMPLES:
        raise ThermoDomainError(f"period_samples must be >= {MIN_PERIOD_SAMPLES}")
    v_ins = _period_inputs(a_in, period_samples, phase)
    states = _solve_unique(cfg, v_ins, "gain measurement")
    taus = [k / period_samples for k in range(period_samples)]
    waveform = [WaveformSample(t, v, s.v_out, s.power) for t, v, s in zip(taus, v_ins, states)]
    v_outs = [s.v_out for s in states]
    a_out = 0.5 * (max(v_outs) - min(v_outs))
    return GainMeasurement(a_in, a_out, a_out / a_in, waveform)


def average_power(
    cfg: CsvacConfig,
    a_in: float,
    gamma: float,
    period_samples: int = DEFAULT_PERIOD_SAMPLES,
    phase: float = 0.0,
) -> float:
    """Mean CSVAC dissipation over one period at escape rate `gamma`."""
    if a_in < 0:
        raise ThermoDomainError(f"a_in must be non-negative, got {a_in}")
    if period_samples < MIN_PERIOD_SAMPLES:
        raise ThermoDomainError(f"period_samples must be >= {MIN_PERIOD_SAMPLES}")
    tuned = replace(cfg, gamma=gamma)
    states = _solve_unique(tuned, _period_inputs(a_in, period_samples, phase), "average power")
    return float(np.mean([s.power for s in states]))


def calibrate_gamma_for_gain(
    cfg_template: CsvacConfig,
    a_in: float,
    target_gain: float,
    period_samples: int = DEFAULT_PERIOD_SAMPLES,
    gamma_max_ratio: float = 1e4,
) -> float:
    """
    Escape rate at which the CSVAC reaches `target_gain` for amplitude a_in.

    Gain grows with gamma towards the transistor-limited maximum. The bracket is
    expanded geometrically from the template's gamma, then refined with Brent's
    method on log(gamma).

    Raises:
        CapabilityError: if the target exceeds the gain at gamma_max_ratio*gamma_l
        SolverError: if the gain stays above the target down to gamma_l*1e-6
    """
    if target_gain < 1:
        raise ThermoDomainError(f"target_gain must be >= 1, got {target_gain}")

    def gain_at(log_gamma: float) -> float:
        cfg = replace(cfg_template, gamma=math.exp(log_gamma))
        return measure_gain(cfg, a_in, period_samples).gain

    gamma_cap = gamma_max_ratio * cfg_template.gamma_l
    gamma_floor = cfg_template.gamma_l * 1e-6
    lo = hi = math.log(min(cfg_template.gamma, gamma_cap))

    while gain_at(hi) < target_gain:
        if hi >= math.log(gamma_cap):
            max_gain = gain_at(math.log(gamma_cap))
            raise CapabilityError(
                f"gain {target_gain} unreachable at v_d={cfg_template.v_d}, a_in={a_in}; "
                f"maximum is {max_gain:.4f}",
                max_gain,
                {'a_in': a_in, 'v_d': cfg_template.v_d, 'gamma_cap': gamma_cap},
            )
        lo = hi
        hi = min(hi + math.log(4.0), math.log(gamma_cap))
    while gain_at(lo) > target_gain:
        if lo <= math.log(gamma_floor):
            raise SolverError(
                f"gain {target_gain} not bracketed: gain at gamma={math.exp(lo):.3g} is still "
                f"{gain_at(lo):.4f}",
                {'a_in': a_in, 'v_d': cfg_template.v_d, 'gamma_floor': gamma_floor},
            )
        hi = lo
        lo = lo - math.log(4.0)

    log_gamma = brentq(lambda x: gain_at(x) - target_gain, lo, hi, xtol=1e-9, maxiter=100)
    gamma = math.exp(log_gamma)
    logger.debug(f"calibrated gamma={gamma:.6g} for G={target_gain} at A_in={a_in}")
    return gamma


def power_map(
    cfg_template: CsvacConfig,
    a_in_grid: Sequence[float],
    gain_grid: Sequence[float],
    period_samples: int = DEFAULT_PERIOD_SAMPLES,
    show_progress: bool = False,
) -> list[PowerMapCell]:
    """Cycle-averaged power over an (A_in, G) grid with gamma calibrated per cell."""
    cells = [(float(a), float(g)) for a in a_in_grid for g in gain_grid]
    iterator = cells
    if show_progress and tqdm:
        iterator = tqdm(cells, desc="Power map")

    results = []
    for a_in, gain in iterator:
        try:
            gamma = calibrate_gamma_for_gain(cfg_template, a_in, gain, period_samples)
        except CapabilityError as e:
            logger.info(f"A_in={a_in}, G={gain} unreachable (max gain {e.max_gain:.3f})")
            results.append(PowerMapCell(a_in, gain, None, None, False))
            continue
        p = average_power(cfg_template, a_in, gamma, period_samples)
        results.append(PowerMapCell(a_in, gain, gamma, p, True))
    return results
