"""
Multistage CSVAC power model and stage-gain allocation.

A gain G is split over K cascaded stages whose gains multiply to G. Stage lambda
sees the amplitude A_in * G_1 * ... * G_(lambda-1) and dissipates
exp(a + b*A_lambda + c*G_lambda). The optimizer works in log-gains
u_lambda = ln G_lambda >= 0 with sum(u) = ln G, where the total power is convex, and
runs pairwise coordinate descent: each move shifts log-gain from one stage to
another with an exact line search.
"""

import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Callable, Optional, Sequence

from scipy.optimize import brentq

try:
    from tqdm import tqdm
except ImportError:
    tqdm = None

from .errors import SolverError, ThermoDomainError
from .powerfit import PowerFit, evaluate_power

logger = logging.getLogger(__name__)

PHI_RATIO = 2 / (1 + math.sqrt(5))

# KKT residual, relative to the total power, at which the descent stops
STATIONARITY_TOLERANCE = 1e-8
MAX_SWEEPS = 5000
MAX_STAGES = 64
SCHEME_REL_TOL = 1e-9
# Power resolution of the stage map: a stage is added only if it saves more than this
STAGE_MAP_PRECISION = 1e-2


@dataclass
class MultistagePlan:
    """Stage gains of a K-stage cascade with their powers."""
    k: int
    gains: tuple[float, ...]
    a_in: float
    total_gain: float
    per_stage_power: tuple[float, ...]
    total_power: float
    savings_vs_single: float
    fit_source: str = "fit"
    stationarity_residual: float = 0.0
    history: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            'k': self.k,
            'gains': list(self.gains),
            'a_in': self.a_in,
            'total_gain': self.total_gain,
            'per_stage_power': list(self.per_stage_power),
            'total_power': self.total_power,
            'savings_vs_single': self.savings_vs_single,
            'fit_source': self.fit_source,
            'stationarity_residual': self.stationarity_residual,
            'history': list(self.history),
        }


@dataclass
class StageMapCell:
    a_in: float
    gain: float
    k_opt: int
    total_power: float
    savings_vs_single: float


# ============================================================================
# Power model
# ============================================================================

def total_power(fit: PowerFit, a_in: float, gains: Sequence[float]) -> MultistagePlan:
    """
    Power of a cascade with the given stage gains.

    Raises:
        ThermoDomainError: on an empty gain list, a gain below 1 or a negative amplitude
    """
    if len(gains) == 0:
        raise ThermoDomainError("at least one stage gain is required")
    if a_in < 0:
        raise ThermoDomainError(f"a_in must be >= 0, got {a_in}")
    per_stage = []
    amplitude = a_in
    for g in gains:
        if g < 1:
            raise ThermoDomainError(f"stage gains must be >= 1, got {g}")
        per_stage.append(evaluate_power(fit, amplitude, g))
        amplitude *= g
    total_gain = math.prod(gains)
    power = sum(per_stage)
    single = evaluate_power(fit, a_in, total_gain)
    return MultistagePlan(
        k=len(gains),
        gains=tuple(float(g) for g in gains),
        a_in=a_in,
        total_gain=total_gain,
        per_stage_power=tuple(per_stage),
        total_power=power,
        savings_vs_single=1.0 - power / single,
        fit_source=fit.source,
    )


def equal_gain_plan(fit: PowerFit, a_in: float, total_gain: float, k: int) -> MultistagePlan:
    """K stages of gain G^(1/K); the optimum in the small-amplitude limit."""
    if k < 1:
        raise ThermoDomainError(f"k must be >= 1, got {k}")
    if total_gain < 1:
        raise ThermoDomainError(f"total_gain must be >= 1, got {total_gain}")
    return total_power(fit, a_in, [total_gain ** (1.0 / k)] * k)


def _log_gain_gradient(fit: PowerFit, a_in: float, u: Sequence[float]) -> tuple[list[float], float]:
    """d(total power)/d(u_j) for every stage, and the total power."""
    powers = []
    amplitudes = []
    amplitude = a_in
    for uj in u:
        g = math.exp(uj)
        powers.append(math.exp(fit.a + fit.b * amplitude + fit.c * g))
        amplitudes.append(amplitude)
        amplitude *= g
    grad = [0.0] * len(u)
    downstream = 0.0
    for j in reversed(range(len(u))):
        grad[j] = fit.c * math.exp(u[j]) * powers[j] + fit.b * downstream
        downstream += amplitudes[j] * powers[j]
    return grad, sum(powers)


def _power_at_log_gains(fit: PowerFit, a_in: float, u: Sequence[float]) -> float:
    amplitude = a_in
    power = 0.0
    for uj in u:
        g = math.exp(uj)
        power += math.exp(fit.a + fit.b * amplitude + fit.c * g)
        amplitude *= g
    return power


def _kkt_residual(u: Sequence[float], grad: Sequence[float]) -> float:
    """Largest gain from moving log-gain off a stage that still has some."""
    donors = [g for uj, g in zip(u, grad) if uj > 0]
    if not donors:
        return 0.0
    return max(0.0, max(donors) - min(grad))


# ============================================================================
# Line search
# ============================================================================

def golden_section(f: Callable[[float], float], lo: float, hi: float,
                   tol: float = 1e-6, max_iterations: int = 200) -> float:
    """Minimizer of a unimodal function on [lo, hi]."""
    x1 = hi - PHI_RATIO * (hi - lo)
    x2 = lo + PHI_RATIO * (hi - lo)
    f1, f2 = f(x1), f(x2)
    iteration = 0
    while abs(hi - lo) > tol and iteration < max_iterations:
        if f2 > f1:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - PHI_RATIO * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + PHI_RATIO * (hi - lo)
            f2 = f(x2)
        iteration += 1
    return 0.5 * (lo + hi)


def _pair_step(fit: PowerFit, a_in: float, u: list[float], i: int, k: int) -> None:
    """Move log-gain between stages i and k to minimize the total power, in place."""
    lo, hi = -u[i], u[k]
    if hi - lo <= 0.0:
        return
    base_i, base_k = u[i], u[k]

    def shifted(t: float) -> list[float]:
        v = list(u)
        v[i] = max(base_i + t, 0.0)
        v[k] = max(base_k - t, 0.0)
        return v

    def slope(t: float) -> float:
        grad, _ = _log_gain_gradient(fit, a_in, shifted(t))
        return grad[i] - grad[k]

    s_lo, s_hi = slope(lo), slope(hi)
    if s_lo >= 0.0:
        t = lo
    elif s_hi <= 0.0:
        t = hi
    else:
        tol = 1e-6 * (hi - lo)
        guess = golden_section(lambda x: _power_at_log_gains(fit, a_in, shifted(x)), lo, hi, tol)
        a, b = max(lo, guess - tol), min(hi, guess + tol)
        if slope(a) < 0.0 < slope(b):
            lo, hi = a, b
        t = brentq(slope, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    v = shifted(t)
    u[i], u[k] = v[i], v[k]


# ============================================================================
# Optimization
# ============================================================================

def optimize_gains(
    fit: PowerFit,
    a_in: float,
    total_gain: float,
    k: int,
    initial_gains: Optional[Sequence[float]] = None,
) -> MultistagePlan:
    """
    Stage gains minimizing the cascade power at fixed total gain.

    Starts from equal gains (or `initial_gains`) and sweeps stage pairs (lambda, K) and
    adjacent pairs until the KKT residual of the log-gain problem falls below
    STATIONARITY_TOLERANCE times the power. Stalled sweeps fall back to all pairs.

    Raises:
        ThermoDomainError: k < 1, total_gain < 1 or a_in < 0
        SolverError: no convergence within MAX_SWEEPS sweeps
    """
    if k < 1:
        raise ThermoDomainError(f"k must be >= 1, got {k}")
    if total_gain < 1:
        raise ThermoDomainError(f"total_gain must be >= 1, got {total_gain}")
    if a_in < 0:
        raise ThermoDomainError(f"a_in must be >= 0, got {a_in}")
    if k == 1:
        return total_power(fit, a_in, [total_gain])

    log_gain = math.log(total_gain)
    if initial_gains is not None and len(initial_gains) == k:
        u = [max(math.log(g), 0.0) for g in initial_gains]
        scale = sum(u)
        u = [x * log_gain / scale for x in u] if scale > 0 else [log_gain / k] * k
    else:
        u = [log_gain / k] * k

    pairs = [(j, k - 1) for j in range(k - 1)] + [(j, j + 1) for j in range(k - 2)]
    all_pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    residual = 0.0
    previous = math.inf
    for sweep in range(MAX_SWEEPS):
        for i, j in pairs:
            _pair_step(fit, a_in, u, i, j)
        grad, power = _log_gain_gradient(fit, a_in, u)
        residual = _kkt_residual(u, grad)
        if residual <= STATIONARITY_TOLERANCE * power:
            break
        if previous - power <= 1e-15 * power:
            if pairs is all_pairs:
                logger.debug(f"K={k}: descent stalled at residual {residual:.3g}")
                break
            pairs = all_pairs
        previous = power
    else:
        raise SolverError(
            f"gain optimization did not converge for K={k}",
            {'a_in': a_in, 'total_gain': total_gain, 'residual': residual},
        )

    # Last stage closes the product exactly
    gains = [math.exp(x) for x in u[:-1]]
    gains.append(max(total_gain / math.prod(gains), 1.0))
    plan = total_power(fit, a_in, gains)
    plan.stationarity_residual = residual
    logger.debug(f"K={k}: gains {[round(g, 5) for g in gains]}, power {plan.total_power:.6g}")
    return plan


def two_stage_stationarity_residual(fit: PowerFit, a_in: float, total_gain: float, g1: float) -> float:
    """d/dG_1 of the two-stage power with G_2 = G/G_1; zero at an interior optimum."""
    if not 1 <= g1 <= total_gain:
        raise ThermoDomainError(f"g1 must lie in [1, {total_gain}], got {g1}")
    first = math.exp(fit.a + fit.b * a_in + fit.c * g1)
    second = math.exp(fit.a + fit.b * a_in * g1 + fit.c * total_gain / g1)
    return fit.c * first + second * (fit.b * a_in - fit.c * total_gain / g1 ** 2)


def two_stage_profile(
    fit: PowerFit,
    a_in: float,
    total_gain: float,
    points: int = 200,
) -> list[tuple[float, float, float]]:
    """(G_1, P, P/min P) over G_1 in [1, G] for a two-stage cascade."""
    if points < 2:
        raise ThermoDomainError("points must be >= 2")
    g1s = [1.0 + (total_gain - 1.0) * i / (points - 1) for i in range(points)]
    powers = [total_power(fit, a_in, [g, total_gain / g]).total_power for g in g1s]
    floor = min(powers)
    return [(g, p, p / floor) for g, p in zip(g1s, powers)]


# ============================================================================
# Thresholds
# ============================================================================

def per_stage_threshold(fit: PowerFit) -> float:
    """Stage gain x with x^2 - x = ln2/c; splitting a stage of gain x^2 pays off above it."""
    if not fit.c > 0:
        raise ThermoDomainError(f"threshold needs c > 0, got {fit.c}")
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * math.log(2.0) / fit.c))


def min_beneficial_gain(fit: PowerFit, k: int, tol: float = 1e-12) -> float:
    """
    Smallest total gain at which K equal stages beat K-1 in the small-amplitude limit.

    Bisection on K*exp(c*G^(1/K)) = (K-1)*exp(c*G^(1/(K-1))).
    """
    if k < 2:
        raise ThermoDomainError(f"k must be >= 2, got {k}")
    if not fit.c > 0:
        raise ThermoDomainError(f"threshold needs c > 0, got {fit.c}")

    def k_stage_wins(g: float) -> bool:
        # Ratio of the two powers, scaled by exp(-c*G^(1/K)) to stay finite
        spread = fit.c * (g ** (1.0 / (k - 1)) - g ** (1.0 / k))
        return k < (k - 1) * math.exp(min(spread, 700.0))

    lo, hi = 1.0, 2.0
    while not k_stage_wins(hi):
        lo, hi = hi, hi * 2.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if k_stage_wins(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ============================================================================
# Stage-count selection
# ============================================================================

def scheme1(
    fit: PowerFit,
    a_in: float,
    total_gain: float,
    max_stages: int = MAX_STAGES,
    rel_tol: float = SCHEME_REL_TOL,
) -> MultistagePlan:
    """
    Optimal stage count and gains.

    Adds stages while the optimized K-stage power improves on the (K-1)-stage power
    by more than rel_tol, and returns the last improving plan. `history` lists the
    optimal power for every K evaluated, starting at K = 1.
    """
    if max_stages < 1:
        raise ThermoDomainError(f"max_stages must be >= 1, got {max_stages}")
    best = optimize_gains(fit, a_in, total_gain, 1)
    history = [best.total_power]
    for k in range(2, max_stages + 1):
        candidate = optimize_gains(fit, a_in, total_gain, k)
        history.append(candidate.total_power)
        if not candidate.total_power < best.total_power * (1.0 - rel_tol):
            break
        best = candidate
    best.history = tuple(history)
    logger.debug(f"A_in={a_in}, G={total_gain}: K_opt={best.k}")
    return best


def _stage_map_cell(fit: PowerFit, a_in: float, gain: float, max_stages: int,
                    precision: float) -> StageMapCell:
    plan = scheme1(fit, a_in, gain, max_stages, precision)
    return StageMapCell(a_in, gain, plan.k, plan.total_power, plan.savings_vs_single)


def optimal_stage_map(
    fit: PowerFit,
    a_in_grid: Sequence[float],
    gain_grid: Sequence[float],
    max_stages: int = MAX_STAGES,
    workers: int = 1,
    show_progress: bool = False,
    precision: float = STAGE_MAP_PRECISION,
) -> list[StageMapCell]:
    """
    K_opt over an (A_in, G) grid, using fully optimized gains in every cell.

    `precision` is the relative power saving an extra stage must exceed. At finite
    precision the savings of the K-th stage first grow and then shrink with G, so
    K_opt can rise and fall again along a row at intermediate amplitudes.

    Rows come back in grid order (A_in outer, G inner) regardless of `workers`.
    """
    if len(a_in_grid) == 0 or len(gain_grid) == 0:
        raise ThermoDomainError("stage map grids must be non-empty")
    if not 0 <= precision < 1:
        raise ThermoDomainError(f"precision must lie in [0, 1), got {precision}")
    tasks = [(fit, float(a), float(g), max_stages, precision)
             for a in a_in_grid for g in gain_grid]

    if workers > 1:
        with Pool(processes=workers) as pool:
            return pool.starmap(_stage_map_cell, tasks)

    iterator = tasks
    if show_progress and tqdm:
        iterator = tqdm(tasks, desc="Stage map")
    return [_stage_map_cell(*task) for task in iterator]
