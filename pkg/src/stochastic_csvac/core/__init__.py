"""
Core modules for the stochastic CSVAC simulator.

This package contains the numerical building blocks:
- units: Unit conventions (kT, V_T, beta*hbar) and SI conversions
- distributions: Fermi-Dirac and Bose-Einstein occupations, detailed balance check
- device: Single-level transistor, generators, steady states, characteristics
- circuits: Single-NMOS amplifier and CSVAC steady states, gain and power
- stochastic: Gillespie sampler and stochastic output-voltage relaxation
- powerfit: Exponential power law fits and built-in coefficient sets
- multistage: Cascade power model, gain allocation and stage-count selection
"""

from .circuits import (
    AmplifierConfig,
    CircuitState,
    CsvacConfig,
    GainMeasurement,
    average_power,
    calibrate_gamma_for_gain,
    measure_gain,
    power_dissipation,
    power_map,
    resistor_current,
    solve_amplifier,
    solve_csvac,
)
from .device import (
    RateMatrix,
    Reservoir,
    SteadyState,
    TransistorKind,
    TransistorLevel,
    build_two_state_generator,
    steady_state,
    sweep_output_characteristic,
    sweep_transfer_characteristic,
)
from .distributions import bose_einstein, check_local_detailed_balance, fermi_dirac
from .errors import (
    CapabilityError,
    ConfigError,
    CsvacError,
    FitError,
    SolverError,
    ThermoDomainError,
)
from .multistage import (
    MultistagePlan,
    min_beneficial_gain,
    optimal_stage_map,
    optimize_gains,
    scheme1,
    total_power,
    two_stage_stationarity_residual,
)
from .powerfit import BUILTIN_FITS, AmplitudeUnit, PowerFit, evaluate_power, fit_power_model
from .stochastic import Trajectory, RelaxationRun, gillespie_simulate, stochastic_vout_relaxation
from .units import DEFAULT_UNITS, UnitSystem

__all__ = [
    'AmplifierConfig', 'CircuitState', 'CsvacConfig', 'GainMeasurement',
    'average_power', 'calibrate_gamma_for_gain', 'measure_gain', 'power_dissipation',
    'power_map', 'resistor_current', 'solve_amplifier', 'solve_csvac',
    'RateMatrix', 'Reservoir', 'SteadyState', 'TransistorKind', 'TransistorLevel',
    'build_two_state_generator', 'steady_state',
    'sweep_output_characteristic', 'sweep_transfer_characteristic',
    'bose_einstein', 'check_local_detailed_balance', 'fermi_dirac',
    'CapabilityError', 'ConfigError', 'CsvacError', 'FitError', 'SolverError', 'ThermoDomainError',
    'MultistagePlan', 'min_beneficial_gain', 'optimal_stage_map', 'optimize_gains',
    'scheme1', 'total_power', 'two_stage_stationarity_residual',
    'BUILTIN_FITS', 'AmplitudeUnit', 'PowerFit', 'evaluate_power', 'fit_power_model',
    'Trajectory', 'RelaxationRun', 'gillespie_simulate', 'stochastic_vout_relaxation',
    'DEFAULT_UNITS', 'UnitSystem',
]
