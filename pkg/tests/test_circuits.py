"""Amplifier and CSVAC steady states, gain measurement and gamma calibration."""

import math
from dataclasses import replace

import numpy as np
import pytest

from stochastic_csvac.core import circuits
from stochastic_csvac.core.circuits import (
    CSVAC_LEVEL_MASKS,
    AmplifierConfig,
    CsvacConfig,
    GainMeasurement,
    amplifier_waveform,
    average_power,
    build_csvac_generator,
    build_joint_generator,
    calibrate_gamma_for_gain,
    csvac_waveform,
    estimate_drain_resistance,
    measure_gain,
    power_dissipation,
    rd_from_gamma,
    resistor_current,
    solve_amplifier,
    solve_csvac,
    sweep_amplifier_transfer,
    sweep_csvac_transfer,
)
from stochastic_csvac.core.device import Reservoir, steady_state
from stochastic_csvac.core.distributions import fermi_dirac
from stochastic_csvac.core.errors import CapabilityError, SolverError, ThermoDomainError


class TestResistor:

    def test_known_value(self):
        assert resistor_current(1.0, 0.0, 0.01) == pytest.approx(-0.0011553, abs=1e-7)

    def test_no_current_at_equal_potentials(self):
        assert resistor_current(-3.0, -3.0, 0.05) == 0.0

    def test_drain_resistance_from_escape_rate(self):
        assert rd_from_gamma(0.01) == pytest.approx(843.2)

    def test_rejects_non_positive_rate(self):
        with pytest.raises(ThermoDomainError):
            resistor_current(0.0, 1.0, 0.0)


class TestAmplifier:

    def test_currents_balance(self):
        state = solve_amplifier(AmplifierConfig(), 0.0)
        assert state.residual < 1e-9
        assert 0.0 <= state.v_out <= 15.0
        assert state.power >= 0.0

    def test_ohm_estimate_tracks_solution(self):
        state = solve_amplifier(AmplifierConfig(), 0.0)
        assert abs(state.ohm_v_out - state.v_out) < 0.1

    def test_estimated_resistance_near_coefficient(self):
        cfg = AmplifierConfig(gamma_r=0.01)
        assert estimate_drain_resistance(cfg) == pytest.approx(rd_from_gamma(0.01), rel=0.05)

    def test_cut_off_transistor_pulls_output_to_supply(self):
        assert solve_amplifier(AmplifierConfig(), -10.0).v_out == pytest.approx(15.0, abs=0.01)

    def test_larger_drain_resistor_amplifies_more(self):
        amplitudes = []
        for gamma_r in (0.02, 0.01, 0.005):
            waveform = amplifier_waveform(AmplifierConfig(gamma_r=gamma_r), amplitude=0.1)
            v_outs = [s.v_out for s in waveform]
            amplitudes.append(0.5 * (max(v_outs) - min(v_outs)))
        assert amplitudes[0] < amplitudes[1] < amplitudes[2]

    def test_output_is_inverted(self):
        waveform = amplifier_waveform(AmplifierConfig(), amplitude=0.1, samples=64)
        peak_in = max(waveform, key=lambda s: s.v_in)
        trough_in = min(waveform, key=lambda s: s.v_in)
        assert peak_in.v_out < trough_in.v_out

    def test_static_transfer_falls_as_the_gate_opens(self):
        states = sweep_amplifier_transfer(AmplifierConfig(), np.linspace(-5.0, 5.0, 11))
        v_outs = [s.v_out for s in states]
        assert all(b <= a + 1e-9 for a, b in zip(v_outs, v_outs[1:]))
        assert v_outs[0] > v_outs[-1]


class TestJointGenerator:

    def test_factorizes_without_exchange(self):
        res_p = [Reservoir('dP', -15.0), Reservoir('s', 0.0)]
        res_n = [Reservoir('dN', 15.0), Reservoir('s', 0.0)]
        m, _ = build_joint_generator(1.0, 14.0, res_p, res_n, 0.2, exchange=False)
        p = steady_state(m, CSVAC_LEVEL_MASKS).occupation_probabilities
        n_p, n_n = p[1] + p[3], p[2] + p[3]
        expected = [(1 - n_p) * (1 - n_n), n_p * (1 - n_n), (1 - n_p) * n_n, n_p * n_n]
        np.testing.assert_allclose(p, expected, atol=1e-10)

    def test_equal_levels_clamp_exchange(self):
        m, clamped = build_joint_generator(1.0, 1.0, [Reservoir('a', 0.0)], [Reservoir('b', 0.0)], 0.2)
        assert clamped
        occupancies = steady_state(m, CSVAC_LEVEL_MASKS).mean_occupancy_per_level
        assert occupancies['P'] == pytest.approx(fermi_dirac(1.0, 0.0), abs=1e-5)
        assert occupancies['N'] == pytest.approx(fermi_dirac(1.0, 0.0), abs=1e-5)

    def test_exchange_channels_are_labelled(self):
        m = build_csvac_generator(CsvacConfig(), 0.0, 0.0)
        labels = {ch.label for ch in m.channels}
        assert {'dP->P', 's->P', 'dN->N', 's->N', 'P->N', 'N->P'} == labels


class TestCsvac:

    def test_zero_input_gives_zero_output(self, csvac_cfg):
        assert abs(solve_csvac(csvac_cfg, 0.0).v_out) < 1e-9

    def test_positive_input_swings_negative(self, csvac_cfg):
        assert -5.5 < solve_csvac(csvac_cfg, 2.5).v_out < -4.0

    def test_negative_input_swings_positive(self, csvac_cfg):
        assert 4.0 < solve_csvac(csvac_cfg, -2.5).v_out < 5.5

    def test_transfer_curve_is_decreasing(self, csvac_cfg):
        v_outs = [s.v_out for s in sweep_csvac_transfer(csvac_cfg, np.linspace(-7.5, 7.5, 15))]
        assert all(b < a for a, b in zip(v_outs, v_outs[1:]))

    def test_node_balance_and_power(self, csvac_cfg):
        for state in sweep_csvac_transfer(csvac_cfg, np.linspace(-7.5, 7.5, 7)):
            assert state.residual < 1e-9
            breakdown = power_dissipation(state)
            assert breakdown.total >= 0.0
            assert breakdown.total == pytest.approx(breakdown.pmos + breakdown.nmos)
            assert state.power == pytest.approx(breakdown.total)

    def test_waveform_follows_input_sign(self, csvac_cfg):
        waveform = csvac_waveform(csvac_cfg, amplitude=-2.5, samples=32)
        for s in waveform:
            if abs(s.v_in) > 0.5:
                assert math.copysign(1.0, s.v_out) == -math.copysign(1.0, s.v_in)


class TestGain:

    def test_small_signal_gain(self):
        g = measure_gain(CsvacConfig(gamma=0.03), 0.1).gain
        assert g == pytest.approx(1.5, abs=0.02)

    def test_unit_gain_when_rates_match(self):
        g = measure_gain(CsvacConfig(gamma=0.01), 0.1).gain
        assert g == pytest.approx(1.0, abs=0.02)

    def test_gain_grows_with_gamma(self):
        gains = [measure_gain(CsvacConfig(gamma=g), 0.1).gain for g in (0.01, 0.03, 0.1, 0.3)]
        assert all(b > a for a, b in zip(gains, gains[1:]))

    def test_sample_count_divisible_by_four_is_stable(self):
        cfg = CsvacConfig(gamma=0.03)
        assert measure_gain(cfg, 0.5, 32).gain == pytest.approx(measure_gain(cfg, 0.5, 64).gain, rel=1e-9)

    def test_refining_samples_barely_moves_gain(self):
        cfg = CsvacConfig(gamma=0.05)
        coarse = measure_gain(cfg, 2.0, 32).gain
        assert abs(measure_gain(cfg, 2.0, 128).gain - coarse) < 1e-3
        assert abs(measure_gain(cfg, 2.0, 36).gain - coarse) < 1e-3

    def test_rejects_too_few_samples(self, csvac_cfg):
        with pytest.raises(ThermoDomainError):
            measure_gain(csvac_cfg, 0.1, period_samples=8)

    def test_rejects_non_positive_amplitude(self, csvac_cfg):
        with pytest.raises(ThermoDomainError):
            measure_gain(csvac_cfg, 0.0)


class TestAveragePower:

    def test_zero_amplitude_is_dc_power(self, csvac_cfg):
        dc = solve_csvac(csvac_cfg, 0.0).power
        assert average_power(csvac_cfg, 0.0, csvac_cfg.gamma) == pytest.approx(dc, rel=1e-12)

    def test_independent_of_phase(self, csvac_cfg):
        p0 = average_power(csvac_cfg, 2.0, 0.05)
        shifted = average_power(csvac_cfg, 2.0, 0.05, phase=math.pi / 2)
        assert shifted == pytest.approx(p0, rel=1e-6)

    def test_unit_gain_costs_less_than_gain_one_and_a_half(self, csvac_cfg):
        unit = average_power(csvac_cfg, 2.0, calibrate_gamma_for_gain(csvac_cfg, 2.0, 1.0))
        amplified = average_power(csvac_cfg, 2.0, calibrate_gamma_for_gain(csvac_cfg, 2.0, 1.5))
        assert unit < amplified

    def test_power_grows_with_calibrated_gain(self, csvac_cfg):
        powers = [average_power(csvac_cfg, 2.0, calibrate_gamma_for_gain(csvac_cfg, 2.0, g))
                  for g in (1.0, 1.2, 1.4, 1.6, 1.8)]
        assert all(b > a for a, b in zip(powers, powers[1:]))


class TestCalibration:

    def test_hits_target_gain(self, csvac_cfg):
        gamma = calibrate_gamma_for_gain(csvac_cfg, 0.5, 1.5)
        g = measure_gain(replace(csvac_cfg, gamma=gamma), 0.5).gain
        assert g == pytest.approx(1.5, rel=1e-4)

    def test_unreachable_gain_reports_maximum(self, csvac_cfg):
        with pytest.raises(CapabilityError) as excinfo:
            calibrate_gamma_for_gain(csvac_cfg, 0.1, 100.0)
        assert excinfo.value.max_gain < 2.1

    def test_rejects_gain_below_one(self, csvac_cfg):
        with pytest.raises(ThermoDomainError):
            calibrate_gamma_for_gain(csvac_cfg, 0.1, 0.5)

    def test_target_below_reach_of_the_gamma_floor_raises(self, csvac_cfg, monkeypatch):
        def flat_gain(cfg, a_in, period_samples=32, phase=0.0):
            return GainMeasurement(a_in, 3.0 * a_in, 3.0)

        monkeypatch.setattr(circuits, 'measure_gain', flat_gain)
        with pytest.raises(SolverError) as excinfo:
            calibrate_gamma_for_gain(csvac_cfg, 1.0, 1.5)
        assert not isinstance(excinfo.value, CapabilityError)
        assert excinfo.value.diagnostics['gamma_floor'] == pytest.approx(csvac_cfg.gamma_l * 1e-6)
