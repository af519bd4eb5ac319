"""
One function per subcommand.

Each takes a resolved RunConfig, writes its artifacts into cfg.output_path and
returns a CommandResult naming the files plus a few summary values for the
console. Tables follow cfg.output_format; fits, plans and sampler reports are
always JSON documents.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from ..core.circuits import (
    AmplifierConfig,
    CsvacConfig,
    amplifier_waveform,
    csvac_waveform,
    estimate_drain_resistance,
    power_map,
    rd_from_gamma,
    sweep_csvac_transfer,
)
from ..core.device import (
    Reservoir,
    TransistorKind,
    TransistorLevel,
    build_two_state_generator,
    drain_current,
    steady_state,
    sweep_output_characteristic,
    sweep_transfer_characteristic,
)
from ..core.errors import ConfigError
from ..core.multistage import optimal_stage_map, optimize_gains, scheme1
from ..core.powerfit import (
    BUILTIN_FITS,
    AmplitudeUnit,
    PowerFit,
    fit_power_model,
    load_power_samples,
)
from ..core.stochastic import (
    RNG_ALGORITHM,
    RelaxationConfig,
    empirical_current,
    gillespie_simulate,
    occupation_fractions,
    relax_many,
)
from ..utils.io import read_json, write_csv, write_json
from .config import OutputFormat, RunConfig

logger = logging.getLogger(__name__)


@dataclass
class CommandResult:
    outputs: list[Path] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)
    rng_algorithm: Optional[str] = None


def write_table(cfg: RunConfig, stem: str, columns: Sequence[tuple[str, str]],
                rows: Sequence[Sequence[Any]]) -> Path:
    """Write rows as CSV or as a JSON list of records, per cfg.output_format."""
    if cfg.output_format is OutputFormat.JSON:
        path = cfg.output_path / f"{stem}.json"
        names = [name for name, _ in columns]
        write_json(path, {
            'columns': [{'name': n, 'unit': u} for n, u in columns],
            'rows': [dict(zip(names, row)) for row in rows],
        })
    else:
        path = cfg.output_path / f"{stem}.csv"
        write_csv(path, columns, rows)
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def resolve_fit(name_or_path: str) -> PowerFit:
    """A built-in coefficient set by name, or a fit JSON written by the `fit` command."""
    if name_or_path in BUILTIN_FITS:
        return BUILTIN_FITS[name_or_path]
    path = Path(name_or_path)
    if path.suffix == '.json' and path.exists():
        return PowerFit.from_dict(read_json(path))
    raise ConfigError(
        f"fit must be one of {sorted(BUILTIN_FITS)} or an existing fit JSON, got {name_or_path!r}"
    )


def _transistor_kind(name: str) -> TransistorKind:
    try:
        return TransistorKind(name.upper())
    except ValueError:
        raise ConfigError(f"kind must be NMOS or PMOS, got {name!r}") from None


# ============================================================================
# Device and circuits
# ============================================================================

def run_characteristics(cfg: RunConfig) -> CommandResult:
    p = cfg.params
    level = TransistorLevel(_transistor_kind(p['kind']), p['eps0'], p['gamma'])
    transfer = sweep_transfer_characteristic(level, p['v_d'], p['v_in_grid'])
    output = sweep_output_characteristic(level, p['output_v_in'], p['v_ds_grid'], transfer.pinch_off)

    columns = [('v_in', 'V_T'), ('v_ds', 'V_T'), ('i_d', 'q/bh')]
    transfer_path = write_table(cfg, 'transfer', columns,
                                [(pt.v_in, pt.v_ds, pt.i_d) for pt in transfer.points])
    output_path = write_table(cfg, 'output', columns,
                              [(pt.v_in, pt.v_ds, pt.i_d) for pt in output.points])
    summary = {
        'kind': level.kind.value,
        'pinch_off': transfer.pinch_off,
        'saturation_current': transfer.saturation_current,
    }
    summary_path = cfg.output_path / 'characteristics.json'
    write_json(summary_path, summary)
    return CommandResult([transfer_path, output_path, summary_path], summary)


def run_amplifier(cfg: RunConfig) -> CommandResult:
    p = cfg.params
    rows = []
    amplitudes = {}
    for gamma_r in p['gamma_r']:
        amp = AmplifierConfig(p['v_dd'], p['gamma'], gamma_r, p['eps0'])
        waveform = amplifier_waveform(amp, p['amplitude'], p['omega'], p['samples'], p['periods'])
        mean = float(np.mean([s.v_out for s in waveform]))
        for s in waveform:
            rows.append((gamma_r, s.tau, s.v_in, s.v_out, s.v_out - mean))
        v_outs = [s.v_out for s in waveform]
        amplitudes[gamma_r] = {
            'output_amplitude': 0.5 * (max(v_outs) - min(v_outs)),
            'rd_estimate': estimate_drain_resistance(amp),
            'rd_from_gamma': rd_from_gamma(gamma_r),
        }
    path = write_table(cfg, 'amplifier', [
        ('gamma_r', '1/bh'), ('tau', 'bh'), ('v_in', 'V_T'), ('v_out', 'V_T'), ('v_out_ac', 'V_T'),
    ], rows)
    summary = {'amplitudes': {repr(g): a for g, a in amplitudes.items()}}
    summary_path = cfg.output_path / 'amplifier.json'
    write_json(summary_path, summary)
    return CommandResult([path, summary_path], {
        f"A_out(gamma_r={g})": a['output_amplitude'] for g, a in amplitudes.items()
    })


def _csvac_config(p: dict) -> CsvacConfig:
    return CsvacConfig(v_d=p['v_d'], gamma=p['gamma'], gamma_l=p['gamma_l'])


def run_csvac_sweep(cfg: RunConfig) -> CommandResult:
    p = cfg.params
    csvac = _csvac_config(p)
    states = sweep_csvac_transfer(csvac, p['v_in_grid'])
    rows = [(s.v_in, s.v_out, s.occupancies['P'], s.occupancies['N'], s.power, s.clamped)
            for s in states]
    path = write_table(cfg, 'csvac_sweep', [
        ('v_in', 'V_T'), ('v_out', 'V_T'), ('n_p', '1'), ('n_n', '1'), ('power', 'kT/bh'), ('clamped', 'bool'),
    ], rows)

    waveform = csvac_waveform(csvac, p['waveform_amplitude'], p['waveform_omega'], p['waveform_samples'])
    waveform_path = write_table(cfg, 'csvac_waveform', [
        ('tau', 'bh'), ('v_in_vt', 'V_T'), ('v_out_vt', 'V_T'),
    ], [(s.tau, s.v_in, s.v_out) for s in waveform])
    return CommandResult([path, waveform_path], {
        'points': len(rows),
        'v_out_range': (states[0].v_out, states[-1].v_out),
    })


def run_power_map(cfg: RunConfig) -> CommandResult:
    p = cfg.params
    cells = power_map(_csvac_config(p), p['a_in_grid'], p['gain_grid'], p['period_samples'],
                      show_progress=True)
    rows = [(c.a_in, c.gain, c.gamma, c.avg_power, c.reachable) for c in cells]
    path = write_table(cfg, 'power_map', [
        ('a_in_vt', 'V_T'), ('gain', '1'), ('gamma', '1/bh'), ('avg_power_kt_per_unit_time', 'kT/bh'),
        ('reachable', 'bool'),
    ], rows)
    reachable = sum(c.reachable for c in cells)
    return CommandResult([path], {'cells': len(cells), 'reachable': reachable})


# ============================================================================
# Stochastic validation
# ============================================================================

def run_gillespie(cfg: RunConfig) -> CommandResult:
    p = cfg.params
    level = TransistorLevel(_transistor_kind(p['kind']), p['eps0'], p['gamma'])
    source = Reservoir('s', 0.0)
    drain = Reservoir('d', -p['v_d'])
    generator = build_two_state_generator(level, p['v_in'], [drain, source])
    rng = np.random.default_rng(cfg.seed)
    traj = gillespie_simulate(generator, 0, n_events=p['n_events'], rng=rng)
    shown = min(p['trajectory_events'], traj.n_events) + 1
    trajectory_path = write_table(cfg, 'trajectory', [('time', 'bh'), ('state', '1')],
                                  list(zip(traj.times[:shown].tolist(), traj.states[:shown].tolist())))

    report = {
        'seed': cfg.seed,
        'rng_algorithm': RNG_ALGORITHM,
        'n_events': traj.n_events,
        'total_time': traj.total_time,
        'occupancy_empirical': float(occupation_fractions(traj)[1]),
        'occupancy_analytic': steady_state(generator).mean_occupancy,
        'current_empirical': empirical_current(traj, 's'),
        'current_analytic': drain_current(level, p['v_in'], p['v_d']),
    }
    path = cfg.output_path / 'gillespie.json'
    write_json(path, report)
    return CommandResult([trajectory_path, path],
                         {k: report[k] for k in ('current_empirical', 'current_analytic')},
                         RNG_ALGORITHM)


def run_relax(cfg: RunConfig) -> CommandResult:
    p = cfg.params
    csvac = _csvac_config(p)
    relax = RelaxationConfig(step_size=p['step_size'], batch_events=p['batch_events'],
                             min_iter=p['min_iter'], max_iter=p['max_iter'])
    seeds = range(cfg.seed, cfg.seed + p['n_seeds'])
    deterministic = sweep_csvac_transfer(csvac, p['v_in_grid'])

    rows = []
    iterates = []
    for state in deterministic:
        for run in relax_many(csvac, state.v_in, seeds, relax):
            rows.append((state.v_in, run.seed, state.v_out, run.final_v_out,
                         run.converged, run.iterations))
            iterates.extend((i, v, run.seed, state.v_in)
                            for i, v in enumerate(run.v_out_history, start=1))
    path = write_table(cfg, 'relax', [
        ('v_in', 'V_T'), ('seed', '1'), ('v_out_deterministic', 'V_T'), ('v_out_stochastic', 'V_T'),
        ('converged', 'bool'), ('iterations', '1'),
    ], rows)
    iterations_path = write_table(cfg, 'relax_iterations', [
        ('iteration', '1'), ('v_out_vt', 'V_T'), ('seed', '1'), ('v_in_vt', 'V_T'),
    ], iterates)
    converged = sum(r[4] for r in rows) / len(rows)
    worst = max(abs(r[2] - r[3]) for r in rows)
    return CommandResult([path, iterations_path],
                         {'converged_fraction': converged, 'max_abs_deviation': worst},
                         RNG_ALGORITHM)


# ============================================================================
# Fitting and optimization
# ============================================================================

def run_fit(cfg: RunConfig) -> CommandResult:
    p = cfg.params
    try:
        unit = AmplitudeUnit(p['amplitude_unit'])
    except ValueError:
        raise ConfigError(f"amplitude_unit must be V_T or volt, got {p['amplitude_unit']!r}") from None
    input_path = Path(p['input'])
    if not input_path.exists():
        raise ConfigError(f"input not found: {input_path}")
    fit = fit_power_model(load_power_samples(input_path), unit, source=input_path.name)
    path = cfg.output_path / 'fit.json'
    write_json(path, fit.to_dict())
    return CommandResult([path], {'a': fit.a, 'b': fit.b, 'c': fit.c, 'r_square': fit.r_square})


def run_optimize(cfg: RunConfig) -> CommandResult:
    p = cfg.params
    plan = optimize_gains(resolve_fit(p['fit']), p['a_in'], p['gain'], p['k'])
    path = cfg.output_path / 'plan.json'
    write_json(path, plan.to_dict())
    return CommandResult([path], {'gains': plan.gains, 'total_power': plan.total_power})


def run_scheme1(cfg: RunConfig) -> CommandResult:
    p = cfg.params
    plan = scheme1(resolve_fit(p['fit']), p['a_in'], p['gain'], p['max_stages'], p['rel_tol'])
    path = cfg.output_path / 'plan.json'
    write_json(path, plan.to_dict())
    return CommandResult([path], {
        'k_opt': plan.k,
        'gains': plan.gains,
        'savings_vs_single': plan.savings_vs_single,
    })


def run_stage_map(cfg: RunConfig) -> CommandResult:
    p = cfg.params
    fit = resolve_fit(p['fit'])
    cells = optimal_stage_map(fit, p['a_in_grid'], p['gain_grid'], p['max_stages'],
                              workers=p['workers'], show_progress=True,
                              precision=p['precision'])
    rows = [(c.a_in, c.gain, c.k_opt, c.total_power, c.savings_vs_single) for c in cells]
    path = write_table(cfg, 'stage_map', [
        ('a_in', fit.amplitude_unit.value), ('gain', '1'), ('k_opt', '1'),
        ('total_power', 'kT/bh'), ('savings_vs_single', '1'),
    ], rows)
    return CommandResult([path], {'cells': len(cells), 'max_k_opt': max(c.k_opt for c in cells)})


COMMANDS: dict[str, Callable[[RunConfig], CommandResult]] = {
    'characteristics': run_characteristics,
    'amplifier': run_amplifier,
    'csvac-sweep': run_csvac_sweep,
    'power-map': run_power_map,
    'gillespie': run_gillespie,
    'relax': run_relax,
    'fit': run_fit,
    'optimize': run_optimize,
    'scheme1': run_scheme1,
    'stage-map': run_stage_map,
}
