"""Gillespie sampler against the master equation, and the output-voltage relaxation."""

import numpy as np
import pytest
from scipy import stats

from stochastic_csvac.core.circuits import CsvacConfig, solve_csvac
from stochastic_csvac.core.device import (
    RateMatrix,
    Reservoir,
    TransistorKind,
    TransistorLevel,
    build_two_state_generator,
    drain_current,
)
from stochastic_csvac.core.errors import ThermoDomainError
from stochastic_csvac.core.stochastic import (
    RelaxationConfig,
    balanced_output,
    dwell_times,
    empirical_current,
    gillespie_simulate,
    occupation_fractions,
    relax_many,
    stochastic_vout_relaxation,
)

NMOS = TransistorLevel(TransistorKind.NMOS, escape_rate=0.2)
RESERVOIRS = [Reservoir('d', -15.0), Reservoir('s', 0.0)]


def symmetric_chain(rate: float = 1.0) -> RateMatrix:
    return RateMatrix(np.array([[-rate, rate], [rate, -rate]]))


class TestGillespie:

    def test_event_count_and_time_accounting(self, rng):
        traj = gillespie_simulate(symmetric_chain(), n_events=500, rng=rng)
        assert traj.n_events == 500
        assert len(traj.times) == 501
        assert np.all(np.diff(traj.times) > 0)
        assert traj.state_time.sum() == pytest.approx(traj.total_time)

    def test_time_horizon_stops_the_clock(self, rng):
        traj = gillespie_simulate(symmetric_chain(), t_max=250.0, rng=rng)
        assert traj.total_time == 250.0
        assert traj.state_time.sum() == pytest.approx(250.0)

    def test_unrecorded_run_keeps_endpoints(self, rng):
        traj = gillespie_simulate(symmetric_chain(), n_events=1000, rng=rng, record=False)
        assert len(traj.times) == 2
        assert traj.n_events == 1000
        assert traj.times[-1] == traj.total_time

    def test_same_seed_same_trajectory(self):
        m = build_two_state_generator(NMOS, 0.0, RESERVOIRS)
        a = gillespie_simulate(m, n_events=2000, rng=np.random.default_rng(7))
        b = gillespie_simulate(m, n_events=2000, rng=np.random.default_rng(7))
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.channel_counts, b.channel_counts)

    def test_absorbing_state_ends_the_run(self, rng):
        m = RateMatrix(np.array([[-1.0, 0.0], [1.0, 0.0]]))
        traj = gillespie_simulate(m, n_events=100, rng=rng)
        assert traj.n_events == 1
        assert traj.final_state == 1

    def test_needs_exactly_one_stopping_rule(self, rng):
        with pytest.raises(ThermoDomainError):
            gillespie_simulate(symmetric_chain(), rng=rng)
        with pytest.raises(ThermoDomainError):
            gillespie_simulate(symmetric_chain(), n_events=10, t_max=1.0, rng=rng)

    def test_unknown_channel_label(self, rng):
        traj = gillespie_simulate(build_two_state_generator(NMOS, 0.0, RESERVOIRS), n_events=10, rng=rng)
        with pytest.raises(ThermoDomainError):
            traj.net_transfer('gate')


class TestAgainstMasterEquation:

    def test_symmetric_chain_occupancy(self, rng):
        traj = gillespie_simulate(symmetric_chain(), n_events=1_000_000, rng=rng, record=False)
        assert occupation_fractions(traj)[1] == pytest.approx(0.5, abs=0.005)

    def test_dwell_times_are_exponential(self, rng):
        traj = gillespie_simulate(symmetric_chain(2.0), n_events=20_000, rng=rng)
        dwell = dwell_times(traj, 0)
        result = stats.kstest(dwell, 'expon', args=(0, 0.5))
        assert result.pvalue > 0.001

    def test_nmos_current_matches_analytic(self, rng):
        m = build_two_state_generator(NMOS, 0.0, RESERVOIRS)
        traj = gillespie_simulate(m, n_events=1_000_000, rng=rng, record=False)
        analytic = drain_current(NMOS, 0.0, 15.0)
        assert analytic == pytest.approx(0.05, rel=1e-3)
        assert empirical_current(traj, 's') == pytest.approx(analytic, rel=0.02)

    def test_error_shrinks_with_sample_size(self):
        m = build_two_state_generator(NMOS, 0.0, RESERVOIRS)
        analytic = drain_current(NMOS, 0.0, 15.0)
        medians = []
        for n_events in (1_000, 10_000, 100_000):
            errors = [
                abs(empirical_current(
                    gillespie_simulate(m, n_events=n_events, rng=np.random.default_rng(seed), record=False),
                    's') - analytic)
                for seed in range(20)
            ]
            medians.append(np.median(errors))
        assert medians[0] > medians[1] > medians[2]


class TestBalancedOutput:

    def test_exact_occupancies_reproduce_the_solution(self, csvac_cfg):
        for v_in in (-2.5, 0.0, 2.5):
            state = solve_csvac(csvac_cfg, v_in)
            v = balanced_output(csvac_cfg, v_in, state.occupancies['P'], state.occupancies['N'])
            assert v == pytest.approx(state.v_out, abs=1e-8)

    def test_full_levels_pin_the_output_to_the_supply(self, csvac_cfg):
        assert balanced_output(csvac_cfg, 0.0, 1.0, 1.0) == -csvac_cfg.v_d

    def test_more_electrons_lower_the_output(self, csvac_cfg):
        low = balanced_output(csvac_cfg, 0.0, 0.2, 0.2)
        high = balanced_output(csvac_cfg, 0.0, 0.3, 0.3)
        assert high < low

    def test_degenerate_levels_relax(self):
        cfg = CsvacConfig()
        expected = solve_csvac(cfg, 7.5).v_out
        run = stochastic_vout_relaxation(cfg, 7.5, seed=5)
        assert abs(run.final_v_out - expected) < 0.2


class TestRelaxation:

    def test_config_validation(self):
        with pytest.raises(ThermoDomainError):
            RelaxationConfig(step_size=0.0)
        with pytest.raises(ThermoDomainError):
            RelaxationConfig(min_iter=50, max_iter=10)

    def test_step_schedule(self):
        relax = RelaxationConfig(step_size=2.0)
        assert relax.step(1) == 1.0
        assert relax.step(16) == 0.5

    def test_reproducible_for_a_seed(self, csvac_cfg):
        a = stochastic_vout_relaxation(csvac_cfg, 1.0, seed=3)
        b = stochastic_vout_relaxation(csvac_cfg, 1.0, seed=3)
        assert a.v_out_history == b.v_out_history
        assert a.final_v_out == b.final_v_out

    def test_stays_within_supplies(self, csvac_cfg):
        run = stochastic_vout_relaxation(csvac_cfg, -7.5, seed=11)
        assert all(-csvac_cfg.v_d <= v <= csvac_cfg.v_d for v in run.v_out_history)
        assert run.iterations >= RelaxationConfig().min_iter

    def test_converges_to_deterministic_output(self, csvac_cfg):
        runs = relax_many(csvac_cfg, 0.0, range(10))
        hits = [r.converged and abs(r.final_v_out) < 0.1 for r in runs]
        assert sum(hits) >= 9

    @pytest.mark.slow
    @pytest.mark.parametrize('v_in', [-7.5, 0.0, 5.0])
    def test_hundred_seeds_converge(self, csvac_cfg, v_in):
        expected = solve_csvac(csvac_cfg, v_in).v_out
        runs = relax_many(csvac_cfg, v_in, range(100))
        hits = [r.converged and abs(r.final_v_out - expected) < 0.1 for r in runs]
        assert sum(hits) >= 95

    @pytest.mark.slow
    def test_overlays_the_transfer_curve(self):
        cfg = CsvacConfig()
        for v_in in np.linspace(-7.5, 7.5, 15):
            expected = solve_csvac(cfg, v_in).v_out
            runs = relax_many(cfg, v_in, range(5))
            assert all(abs(run.final_v_out - expected) < 0.2 for run in runs), v_in
