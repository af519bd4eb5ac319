"""Single-level transistor: generators, steady states and characteristic curves."""

import numpy as np
import pytest

from stochastic_csvac.core.device import (
    RateMatrix,
    Reservoir,
    TransistorKind,
    TransistorLevel,
    build_two_state_generator,
    drain_current,
    electrode_current,
    find_pinch_off,
    level_energy,
    steady_state,
    sweep_output_characteristic,
    sweep_transfer_characteristic,
    two_state_occupancy,
)
from stochastic_csvac.core.errors import SolverError, ThermoDomainError

NMOS = TransistorLevel(TransistorKind.NMOS)
PMOS = TransistorLevel(TransistorKind.PMOS)


class TestLevel:

    def test_gate_moves_levels_in_opposite_directions(self):
        assert level_energy(NMOS, 2.0) == -2.0
        assert level_energy(PMOS, 2.0) == 2.0

    def test_reference_energy_offsets_the_level(self):
        level = TransistorLevel(TransistorKind.NMOS, reference_energy=5.0)
        assert level_energy(level, 1.0) == 4.0

    def test_rejects_non_positive_escape_rate(self):
        with pytest.raises(ThermoDomainError):
            TransistorLevel(TransistorKind.NMOS, escape_rate=0.0)


class TestGenerator:

    def test_columns_sum_to_zero(self):
        m = build_two_state_generator(NMOS, 1.0, [Reservoir('d', -15.0), Reservoir('s', 0.0)])
        np.testing.assert_allclose(m.entries.sum(axis=0), 0.0, atol=1e-15)
        assert np.all(m.entries[~np.eye(2, dtype=bool)] >= 0)

    def test_channels_carry_reservoir_labels(self):
        m = build_two_state_generator(NMOS, 0.0, [Reservoir('d', -15.0), Reservoir('s', 0.0)])
        assert {ch.label for ch in m.channels} == {'d', 's'}
        assert sorted(ch.delta for ch in m.channels) == [-1, -1, 1, 1]

    def test_rejects_unbalanced_columns(self):
        with pytest.raises(ThermoDomainError):
            RateMatrix(np.array([[-1.0, 0.5], [0.5, -0.5]]))

    def test_rejects_negative_rates(self):
        with pytest.raises(ThermoDomainError):
            RateMatrix(np.array([[1.0, 0.0], [-1.0, 0.0]]))

    def test_requires_a_reservoir(self):
        with pytest.raises(ThermoDomainError):
            build_two_state_generator(NMOS, 0.0, [])


class TestSteadyState:

    def test_two_state_closed_form(self):
        a, b = 0.3, 0.05
        state = steady_state(RateMatrix(np.array([[-a, b], [a, -b]])))
        assert state.mean_occupancy == pytest.approx(a / (a + b), abs=1e-12)
        assert state.occupation_probabilities.sum() == pytest.approx(1.0)

    def test_matches_closed_form_occupancy(self):
        reservoirs = [Reservoir('d', -15.0), Reservoir('s', 0.0)]
        for v_in in np.linspace(-10, 10, 9):
            m = build_two_state_generator(NMOS, v_in, reservoirs)
            expected = two_state_occupancy(level_energy(NMOS, v_in), reservoirs, NMOS.escape_rate)
            assert steady_state(m).mean_occupancy == pytest.approx(expected, abs=1e-12)

    def test_zero_generator_is_degenerate(self):
        with pytest.raises(SolverError) as excinfo:
            steady_state(RateMatrix(np.zeros((2, 2))))
        assert 'singular_values' in excinfo.value.diagnostics

    def test_single_reservoir_equilibrium_carries_no_current(self):
        r = Reservoir('d', 2.0)
        n = steady_state(build_two_state_generator(NMOS, 1.0, [r])).mean_occupancy
        assert electrode_current(NMOS, r, n, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_currents_into_the_level_cancel(self):
        drain, source = Reservoir('d', -15.0), Reservoir('s', 0.0)
        n = steady_state(build_two_state_generator(NMOS, 0.0, [drain, source])).mean_occupancy
        total = electrode_current(NMOS, drain, n) + electrode_current(NMOS, source, n)
        assert total == pytest.approx(0.0, abs=1e-14)

    def test_random_generators_match_closed_form(self, rng):
        for a, b in rng.uniform(1e-3, 10.0, size=(1000, 2)):
            state = steady_state(RateMatrix(np.array([[-a, b], [a, -b]])))
            assert state.mean_occupancy == pytest.approx(a / (a + b), abs=1e-12)


class TestCharacteristics:

    def test_nmos_pinch_off(self):
        # |i_D| / peak ~ expit(v_in) below threshold, so the 1% crossing sits at logit(0.01)
        pinch_off = sweep_transfer_characteristic(NMOS, 15.0).pinch_off
        assert pinch_off == pytest.approx(-4.602, abs=1e-3)
        assert pinch_off == pytest.approx(-5.0, abs=0.5)

    def test_pmos_pinch_off(self):
        assert sweep_transfer_characteristic(PMOS, 15.0).pinch_off == pytest.approx(4.602, abs=1e-3)

    def test_reference_energy_shifts_pinch_off(self):
        level = TransistorLevel(TransistorKind.NMOS, reference_energy=2.0)
        assert sweep_transfer_characteristic(level, 15.0).pinch_off == pytest.approx(-2.596, abs=1e-3)

    def test_pinch_off_does_not_depend_on_grid_spacing(self):
        coarse = sweep_transfer_characteristic(NMOS, 15.0, np.linspace(-10, 10, 11)).pinch_off
        fine = sweep_transfer_characteristic(NMOS, 15.0, np.linspace(-10, 10, 401)).pinch_off
        assert coarse == pytest.approx(fine, abs=1e-9)

    def test_current_at_pinch_off_is_one_percent_of_peak(self):
        sweep = sweep_transfer_characteristic(NMOS, 15.0)
        peak = max(abs(p.i_d) for p in sweep.points)
        assert abs(drain_current(NMOS, sweep.pinch_off, 15.0)) == pytest.approx(0.01 * peak, rel=1e-9)

    def test_nmos_transfer_grows_up_to_saturation(self):
        points = sweep_transfer_characteristic(NMOS, 15.0).points
        currents = [abs(p.i_d) for p in points if p.v_in <= 5.0]
        assert all(b >= a for a, b in zip(currents, currents[1:]))

    def test_output_curves_saturate_past_pre_pinch_off(self):
        v_ds_grid = np.linspace(0, 20, 41)
        output = sweep_output_characteristic(NMOS, [0.0, 2.0, 4.0], v_ds_grid)
        for v_in, curve in output.curves.items():
            plateau = [abs(p.i_d) for p in curve if p.v_ds >= v_in + 7.0]
            assert max(plateau) - min(plateau) < 0.01 * max(plateau)

    def test_pre_pinch_off_boundary(self):
        output = sweep_output_characteristic(NMOS, [2.0], [0.0, 10.0, 20.0], pinch_off=-5.0)
        assert output.pre_pinch_off_boundary(2.0) == 7.0

    def test_no_current_without_bias(self):
        assert drain_current(NMOS, 3.0, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_pinch_off_is_none_when_always_conducting(self):
        points = sweep_transfer_characteristic(NMOS, 15.0, [5.0, 6.0, 7.0]).points
        assert find_pinch_off(NMOS, 15.0, points) is None

    def test_rejects_empty_grid(self):
        with pytest.raises(ThermoDomainError):
            sweep_transfer_characteristic(NMOS, 15.0, [])
