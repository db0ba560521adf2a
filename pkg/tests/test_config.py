"""Configuration defaults, file loading, and override routing."""
import math

import pytest

from irs_sensing.config import (SPEED_OF_LIGHT, ArrayConfig, WaveformConfig,
                                config_from_dict, default_config, load_config,
                                with_overrides)
from irs_sensing.errors import ConfigError


def test_default_waveform_constants(cfg):
    wf = cfg.waveform
    assert wf.carrier_freq_hz == 60e9
    assert wf.n_subcarriers == 10
    assert wf.n_pulses == 10
    assert wf.symbol_duration_s == 2e-6
    assert wf.cyclic_prefix_s == 1e-6
    assert wf.pri_s == 8e-6
    assert wf.subcarrier_spacing_hz == pytest.approx(500e3)
    assert wf.full_symbol_s == pytest.approx(3e-6)


def test_wavelength_uses_exact_light_speed(cfg):
    assert SPEED_OF_LIGHT == 2.99792458e8
    assert cfg.waveform.wavelength_m == pytest.approx(SPEED_OF_LIGHT / 60e9)


def test_default_arrays(cfg):
    assert cfg.arrays.n_ap_antennas == 16
    assert cfg.arrays.n_irs_elements == 32
    assert cfg.arrays.element_spacing_m == pytest.approx(
        cfg.waveform.wavelength_m / 2)


def test_default_scene(cfg):
    sc = cfg.scene
    assert sc.ap_position_m == (0.0, 0.0)
    assert sc.irs_position_m == (100.0, 100.0)
    assert len(sc.targets) == 2
    assert sc.targets[0].position_m == (533.0, -170.0)
    assert sc.targets[0].radial_velocity_mps == pytest.approx(16.66)
    assert sc.targets[1].radial_velocity_mps == pytest.approx(-22.0)
    assert sc.doa_prior_rad == pytest.approx((math.radians(30), math.radians(45)))
    assert sc.rician_k_db is None


def test_yaml_file_matches_defaults():
    assert load_config("configs/default.yaml") == default_config()


def test_unknown_section_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"wavform": {}})


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"waveform": {"n_subcarier": 4}})


def test_doa_prior_degrees_converted():
    cfg = config_from_dict({"scene": {"doa_prior_deg": [10, 20]}})
    assert cfg.scene.doa_prior_rad == pytest.approx(
        (math.radians(10), math.radians(20)))


def test_numeric_strings_coerced():
    cfg = config_from_dict({"waveform": {"carrier_freq_hz": "60.0e9",
                                         "n_pulses": "8"}})
    assert cfg.waveform.carrier_freq_hz == 60e9
    assert cfg.waveform.n_pulses == 8


def test_bad_numeric_string_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"waveform": {"carrier_freq_hz": "sixty GHz"}})


def test_invalid_waveform_values_rejected():
    with pytest.raises(ConfigError):
        WaveformConfig(n_subcarriers=0)
    with pytest.raises(ConfigError):
        WaveformConfig(symbol_duration_s=-1e-6)
    with pytest.raises(ConfigError):
        WaveformConfig(modulation_symbol=2.0 + 0.0j)


def test_invalid_array_values_rejected():
    with pytest.raises(ConfigError):
        ArrayConfig(n_ap_antennas=0, wavelength_m=5e-3)


def test_with_overrides_routes_sections():
    base = default_config()
    out = with_overrides(base, n_pulses=20, n_ap_antennas=8)
    assert out.waveform.n_pulses == 20
    assert out.arrays.n_ap_antennas == 8
    assert out.scene == base.scene


def test_with_overrides_unknown_key():
    with pytest.raises(ConfigError):
        with_overrides(default_config(), bogus_knob=3)


def test_wavelength_tracks_carrier_override():
    out = with_overrides(default_config(), carrier_freq_hz=30e9)
    assert out.arrays.wavelength_m == pytest.approx(SPEED_OF_LIGHT / 30e9)


def test_target_parsing_errors():
    with pytest.raises(ConfigError):
        config_from_dict({"scene": {"targets": [{"radial_velocity_mps": 3}]}})
    with pytest.raises(ConfigError):
        config_from_dict({"scene": {"targets": [{"position_m": [1, 2, 3]}]}})
