"""Config parsing, unit resolution and precedence."""

from pathlib import Path

import pytest

from stochastic_csvac.core.errors import ConfigError
from stochastic_csvac.core.units import DEFAULT_UNITS
from stochastic_csvac.pipeline.config import (
    OUTPUT_DIR_ENV,
    OutputFormat,
    RunConfig,
    load_config_file,
    parse_assignment,
    parse_lines,
    resolve_config,
)

CONFIG_DIR = Path(__file__).parent.parent / 'configs'


class TestParsing:

    def test_comments_and_blank_lines(self):
        raw = parse_lines("# header\n\nv_d = 15 V_T  # supply\ngamma=0.2\n")
        assert raw == {'v_d': '15 V_T', 'gamma': '0.2'}

    def test_malformed_line_names_its_position(self):
        with pytest.raises(ConfigError, match='cfg:2'):
            parse_lines("v_d = 15\nnot a setting\n", 'cfg')

    def test_assignment(self):
        assert parse_assignment('kind=PMOS') == ('kind', 'PMOS')
        with pytest.raises(ConfigError):
            parse_assignment('kind')

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(tmp_path / 'absent.conf')

    def test_shipped_configs_resolve(self):
        for path in sorted(CONFIG_DIR.glob('*.conf')):
            raw = load_config_file(path)
            command = path.stem.removesuffix('-entity')
            fit_unit = 'volt' if raw.get('fit', '').strip() == 'entity' else 'V_T'
            resolve_config(command, raw, seed=1, fit_unit=fit_unit)


class TestResolution:

    def test_defaults(self):
        cfg = resolve_config('csvac-sweep', {})
        assert cfg.params['v_d'] == 15.0
        assert len(cfg.params['v_in_grid']) == 15
        assert cfg.params['v_in_grid'][0] == -7.5
        assert cfg.output_format is OutputFormat.CSV

    def test_volt_tag_converts_to_thermal_units(self):
        cfg = resolve_config('csvac-sweep', {'v_d': '0.5 volt'})
        assert cfg.params['v_d'] == pytest.approx(DEFAULT_UNITS.volts_to_vt(0.5))

    def test_default_unit_key(self):
        cfg = resolve_config('csvac-sweep', {'unit': 'volt', 'v_d': '0.5'})
        assert cfg.params['v_d'] == pytest.approx(DEFAULT_UNITS.volts_to_vt(0.5))

    def test_amplitude_follows_fit_unit(self):
        cfg = resolve_config('scheme1', {'fit': 'entity', 'a_in': '2', 'gain': '2'}, fit_unit='volt')
        assert cfg.params['a_in'] == pytest.approx(DEFAULT_UNITS.vt_to_volts(2.0))
        cfg = resolve_config('scheme1', {'fit': 'entity', 'a_in': '2 volt', 'gain': '2'}, fit_unit='volt')
        assert cfg.params['a_in'] == 2.0

    def test_comma_list(self):
        cfg = resolve_config('amplifier', {'gamma_r': '0.02, 0.01'})
        assert cfg.params['gamma_r'] == [0.02, 0.01]

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match='unknown keys'):
            resolve_config('csvac-sweep', {'v_dd': '15'})

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match='a_in'):
            resolve_config('scheme1', {'gain': '2'})

    def test_randomized_command_needs_seed(self):
        with pytest.raises(ConfigError, match='seed'):
            resolve_config('gillespie', {})
        assert resolve_config('gillespie', {}, seed=3).seed == 3

    def test_unit_not_allowed_on_dimensionless_value(self):
        with pytest.raises(ConfigError):
            resolve_config('csvac-sweep', {'gamma': '0.2 volt'})

    def test_unparseable_number(self):
        with pytest.raises(ConfigError):
            resolve_config('csvac-sweep', {'v_d': 'fifteen'})

    def test_output_dir_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
        assert resolve_config('csvac-sweep', {}).output_path == tmp_path / 'csvac-sweep'

    def test_dict_round_trip(self):
        cfg = resolve_config('relax', {}, seed=4, output_format='json')
        again = RunConfig.from_dict(cfg.to_dict())
        assert again == cfg
