"""
Stochastic simulation of the master equations.

gillespie_simulate draws exact jump trajectories of any RateMatrix; currents
are read back as net channel transfers per unit time and occupancies as the
fraction of time spent in each state.

stochastic_vout_relaxation lets the CSVAC output voltage settle under sampled
occupancies. Each iteration simulates a batch of events at the current V_out,
measures the time-averaged occupancy of both levels, solves the source-node
balance for the output voltage those occupancies imply, and moves V_out part
of the way there with a step that decays as 1/sqrt(t).
"""

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.optimize import brentq

try:
    from tqdm import tqdm
except ImportError:
    tqdm = None

from .circuits import (
    CSVAC_LEVEL_MASKS,
    CsvacConfig,
    build_csvac_generator,
    inter_transistor_rates,
    resistor_current,
)
from .device import Channel, RateMatrix, level_energy
from .distributions import fermi_dirac
from .errors import ThermoDomainError

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "PCG64"

# Random draws are fetched in blocks of this size when running to a time horizon
_DRAW_BLOCK = 4096


@dataclass
class Trajectory:
    """
    One realization of a Markov jump process.

    `times[i]` is the time of the i-th jump and `states[i]` the state entered at it
    (times[0] = 0 holds the initial state). Unrecorded runs keep only the first and
    last entries. `channel_counts[c]` counts firings of `channels[c]` and
    `state_time[s]` the total time spent in state s.
    """
    times: np.ndarray
    states: np.ndarray
    channels: tuple[Channel, ...]
    channel_counts: np.ndarray
    state_time: np.ndarray
    total_time: float

    @property
    def dimension(self) -> int:
        return len(self.state_time)

    @property
    def final_state(self) -> int:
        return int(self.states[-1])

    @property
    def n_events(self) -> int:
        return int(self.channel_counts.sum())

    def net_transfer(self, label: str) -> int:
        """Electrons moved into the system through channels labelled `label`."""
        matched = [i for i, ch in enumerate(self.channels) if ch.label == label]
        if not matched:
            raise ThermoDomainError(f"no channel labelled {label!r}")
        return int(sum(self.channel_counts[i] * self.channels[i].delta for i in matched))


def gillespie_simulate(
    m: RateMatrix,
    initial_state: int = 0,
    n_events: Optional[int] = None,
    t_max: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
    record: bool = True,
) -> Trajectory:
    """
    Exact stochastic simulation of a generator.

    Each step waits an exponential time with the total exit rate of the current
    state, then picks an outgoing channel with probability proportional to its
    rate. Exactly one of n_events or t_max must be given.

    Args:
        m: Generator with its channel decomposition
        initial_state: Starting state index
        n_events: Stop after this many jumps
        t_max: Stop at this time horizon
        rng: numpy Generator; a fresh PCG64 generator when omitted
        record: Keep the full jump history

    Returns:
        Trajectory with per-channel event counts and per-state dwell time
    """
    if (n_events is None) == (t_max is None):
        raise ThermoDomainError("give exactly one of n_events or t_max")
    if n_events is not None and n_events < 0:
        raise ThermoDomainError(f"n_events must be non-negative, got {n_events}")
    if t_max is not None and not t_max > 0:
        raise ThermoDomainError(f"t_max must be positive, got {t_max}")
    if not 0 <= initial_state < m.dimension:
        raise ThermoDomainError(f"initial_state {initial_state} outside 0..{m.dimension - 1}")
    if rng is None:
        rng = np.random.default_rng()

    channels = m.channels
    outgoing = [[] for _ in range(m.dimension)]
    for index, ch in enumerate(channels):
        if ch.rate > 0:
            outgoing[ch.source].append(index)
    cumulative = [np.cumsum([channels[i].rate for i in out]).tolist() for out in outgoing]
    exit_rates = [c[-1] if c else 0.0 for c in cumulative]
    targets = [ch.target for ch in channels]
    counts = [0] * len(channels)
    dwell = [0.0] * m.dimension

    block = n_events if n_events is not None else _DRAW_BLOCK
    waits = rng.standard_exponential(block).tolist()
    picks = rng.random(block).tolist()
    k = 0

    t = 0.0
    s = initial_state
    times = [0.0]
    states = [s]
    events = 0
    while n_events is None or events < n_events:
        total = exit_rates[s]
        if total == 0.0:
            logger.warning(f"absorbing state {s} reached after {events} events")
            if t_max is not None:
                dwell[s] += t_max - t
                t = t_max
            break
        if k == len(waits):
            waits = rng.standard_exponential(_DRAW_BLOCK).tolist()
            picks = rng.random(_DRAW_BLOCK).tolist()
            k = 0
        dt = waits[k] / total
        if t_max is not None and t + dt > t_max:
            dwell[s] += t_max - t
            t = t_max
            break
        cum = cumulative[s]
        j = min(bisect.bisect_right(cum, picks[k] * total), len(cum) - 1)
        k += 1
        chosen = outgoing[s][j]
        counts[chosen] += 1
        dwell[s] += dt
        t += dt
        s = targets[chosen]
        events += 1
        if record:
            times.append(t)
            states.append(s)

    if not record:
        times.append(t)
        states.append(s)
    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states, dtype=int),
        channels=channels,
        channel_counts=np.asarray(counts, dtype=np.int64),
        state_time=np.asarray(dwell),
        total_time=t,
    )


def empirical_current(traj: Trajectory, label: str) -> float:
    """Net electron current into the system through `label`, per unit time."""
    if not traj.total_time > 0:
        raise ThermoDomainError("trajectory has zero duration")
    return traj.net_transfer(label) / traj.total_time


def occupation_fractions(traj: Trajectory) -> np.ndarray:
    """Fraction of the total time spent in each state."""
    if not traj.total_time > 0:
        raise ThermoDomainError("trajectory has zero duration")
    return traj.state_time / traj.total_time


def dwell_times(traj: Trajectory, state: int) -> np.ndarray:
    """Durations of the completed visits to `state` (needs a recorded trajectory)."""
    durations = np.diff(traj.times)
    return durations[traj.states[:-1] == state]


# ============================================================================
# Output-voltage relaxation
# ============================================================================

@dataclass(frozen=True)
class RelaxationConfig:
    """Step schedule and stopping rule of the V_out relaxation."""
    step_size: float = 2.0
    batch_events: int = 8000
    min_iter: int = 30
    max_iter: int = 80
    smoothing: float = 0.2
    tolerance: float = 0.05

    def __post_init__(self):
        if not self.step_size > 0:
            raise ThermoDomainError("step_size must be positive")
        if self.batch_events < 1:
            raise ThermoDomainError("batch_events must be at least 1")
        if not 1 <= self.min_iter <= self.max_iter:
            raise ThermoDomainError("need 1 <= min_iter <= max_iter")
        if not 0 < self.smoothing <= 1:
            raise ThermoDomainError("smoothing must lie in (0, 1]")

    def step(self, t: int) -> float:
        return min(1.0, self.step_size / math.sqrt(t))


@dataclass
class RelaxationRun:
    """History of one relaxation; final_v_out averages the second half of the iterates."""
    seed: int
    v_in: float
    initial_v_out: float
    v_out_history: list[float] = field(default_factory=list)
    update_history: list[float] = field(default_factory=list)
    converged: bool = False
    final_v_out: float = float('nan')
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def iterations(self) -> int:
        return len(self.v_out_history)


def balanced_output(cfg: CsvacConfig, v_in: float, n_p: float, n_n: float) -> float:
    """
    Output voltage that balances the source node for fixed level occupancies.

    The transistor current into the source node, gamma*(n - f_s) summed over both
    levels, grows with V_out while the load current falls, so the root is unique.
    Returns the nearer supply when the balance has no root inside [-V_d, V_d].
    """
    eps_p = level_energy(cfg.pmos, v_in)
    eps_n = level_energy(cfg.nmos, v_in)

    def imbalance(v_out: float) -> float:
        mu_s = -v_out
        into_source = cfg.gamma * (n_p - fermi_dirac(eps_p, mu_s) + n_n - fermi_dirac(eps_n, mu_s))
        return into_source - resistor_current(0.0, mu_s, cfg.gamma_l)

    if imbalance(-cfg.v_d) >= 0.0:
        return -cfg.v_d
    if imbalance(cfg.v_d) <= 0.0:
        return cfg.v_d
    return brentq(imbalance, -cfg.v_d, cfg.v_d, xtol=1e-12)


def stochastic_vout_relaxation(
    cfg: CsvacConfig,
    v_in: float,
    seed: int,
    relax: RelaxationConfig = RelaxationConfig(),
    initial_v_out: Optional[float] = None,
) -> RelaxationRun:
    """
    Relax the CSVAC output voltage under simulated occupancies.

    V_out starts uniform in [-V_d, V_d] unless given. Iteration t runs
    `batch_events` jumps of the joint chain at the current V_out, solves the node
    balance with the sampled occupancies and moves V_out by min(1, step_size/sqrt(t))
    of the way to that target. The run stops once min_iter iterations passed and the
    exponential average of the signed updates falls below `tolerance`, or at max_iter.
    """
    rng = np.random.default_rng(seed)
    if initial_v_out is None:
        initial_v_out = float(rng.uniform(-cfg.v_d, cfg.v_d))
    run = RelaxationRun(seed=seed, v_in=v_in, initial_v_out=initial_v_out)

    # Exchange conserves n_P + n_N, the only occupancy the node balance sees. Clamped
    # (degenerate) exchange would spend nearly every event hopping between the levels.
    exchange = not inter_transistor_rates(
        level_energy(cfg.pmos, v_in), level_energy(cfg.nmos, v_in), cfg.gamma,
    ).clamped
    if not exchange:
        logger.debug(f"v_in={v_in}: degenerate levels, sampling without exchange")

    v_out = initial_v_out
    state = 0
    trend = 0.0
    for t in range(1, relax.max_iter + 1):
        generator = build_csvac_generator(cfg, v_in, v_out, exchange)
        traj = gillespie_simulate(generator, state, n_events=relax.batch_events, rng=rng, record=False)
        state = traj.final_state

        p = occupation_fractions(traj)
        n_p = float(p[list(CSVAC_LEVEL_MASKS['P'])].sum())
        n_n = float(p[list(CSVAC_LEVEL_MASKS['N'])].sum())
        target = balanced_output(cfg, v_in, n_p, n_n)

        new_v_out = float(np.clip(v_out + relax.step(t) * (target - v_out), -cfg.v_d, cfg.v_d))
        trend = (1.0 - relax.smoothing) * trend + relax.smoothing * (new_v_out - v_out)
        v_out = new_v_out
        run.v_out_history.append(v_out)
        run.update_history.append(abs(trend))

        if t >= relax.min_iter and abs(trend) < relax.tolerance:
            run.converged = True
            break

    if not run.converged:
        logger.warning(f"seed {seed}, v_in={v_in}: relaxation hit max_iter={relax.max_iter}")
    half = run.v_out_history[len(run.v_out_history) // 2:]
    run.final_v_out = float(np.mean(half))
    logger.debug(
        f"seed {seed}: V_out {initial_v_out:.3f} -> {run.final_v_out:.4f} "
        f"in {run.iterations} iterations (converged={run.converged})"
    )
    return run


def relax_many(
    cfg: CsvacConfig,
    v_in: float,
    seeds: Iterable[int],
    relax: RelaxationConfig = RelaxationConfig(),
    show_progress: bool = False,
) -> list[RelaxationRun]:
    """One relaxation per seed."""
    seeds = list(seeds)
    iterator = seeds
    if show_progress and tqdm:
        iterator = tqdm(seeds, desc="Relaxation runs")
    return [stochastic_vout_relaxation(cfg, v_in, seed, relax) for seed in iterator]
