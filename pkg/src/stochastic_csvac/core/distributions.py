"""
Occupation statistics and the local detailed balance law.

All arguments are energies in kT. The Fermi-Dirac form goes through
scipy.special.expit, and the Bose-Einstein form is evaluated as
exp(-x)/(1 - exp(-x)), so neither overflows for |x| up to several hundred kT.
"""

import logging
import math
from typing import NamedTuple

from scipy.special import expit

from .errors import ThermoDomainError

logger = logging.getLogger(__name__)

# Bose-Einstein arguments at or below this are clamped and flagged
BOSE_X_MIN = 1e-6


class BoseOccupancy(NamedTuple):
    """Bose-Einstein occupancy plus a flag raised when the argument was clamped."""
    value: float
    clamped: bool


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ThermoDomainError(f"{name} must be finite, got {value!r}")


def fermi_dirac(x: float, mu: float) -> float:
    """
    Fermi-Dirac occupation 1/(exp(x - mu) + 1) of energy x in a reservoir at mu.

    Args:
        x: Energy in kT
        mu: Chemical potential in kT

    Returns:
        Occupation probability in (0, 1)
    """
    _require_finite(x=x, mu=mu)
    return float(expit(mu - x))


def bose_einstein(x: float) -> BoseOccupancy:
    """
    Bose-Einstein occupancy 1/(exp(x) - 1).

    Arguments at or below BOSE_X_MIN are replaced by BOSE_X_MIN and the result is
    flagged, since the distribution diverges at zero.
    """
    _require_finite(x=x)
    clamped = x <= BOSE_X_MIN
    if clamped:
        logger.debug(f"Bose-Einstein argument {x!r} clamped to {BOSE_X_MIN}")
        x = BOSE_X_MIN
    tail = math.exp(-x)
    return BoseOccupancy(tail / -math.expm1(-x), clamped)


def check_local_detailed_balance(
    k_forward: float,
    k_backward: float,
    e_from: float,
    e_to: float,
) -> float:
    """
    Relative residual of the local detailed balance law.

    A transfer from a state of energy e_from to one of energy e_to at rate
    k_forward, with reverse rate k_backward, must satisfy
    k_forward/k_backward = exp(-(e_to - e_from)).

    Returns:
        |k_forward/k_backward - exp(-(e_to - e_from))| / exp(-(e_to - e_from))
    """
    _require_finite(k_forward=k_forward, k_backward=k_backward, e_from=e_from, e_to=e_to)
    if k_forward <= 0 or k_backward <= 0:
        raise ThermoDomainError(
            f"rates must be positive, got k_forward={k_forward}, k_backward={k_backward}"
        )
    # Compared in log space so tiny rates do not underflow the ratio
    log_ratio = math.log(k_forward) - math.log(k_backward)
    return abs(math.expm1(log_ratio + (e_to - e_from)))
