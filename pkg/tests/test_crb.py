"""Information matrix, variance bounds, and their self-consistency checks."""
import dataclasses
import math

import numpy as np
import pytest

import irs_sensing.crb as crb_mod
from irs_sensing.config import ArrayConfig
from irs_sensing.crb import (FIM_CONDITION_LIMIT, compute_crb, compute_fim,
                             factor_derivatives, log_likelihood,
                             mc_score_covariance, model_tensors,
                             noise_cov_map, parameter_index, score,
                             score_fd_check)
from irs_sensing.errors import SingularFim
from irs_sensing.scene import (build_los_channel, derive_target_truth,
                               design_beamformers, steering_derivative)
from irs_sensing.synthesis import (build_factor_matrices, noise_sigma_for_snr,
                                   synthesize_echo_tensor)


@pytest.fixture(scope="module")
def noise_vars(clean_pair):
    return tuple(noise_sigma_for_snr(t, 0.0) ** 2 for t in clean_pair)


@pytest.fixture(scope="module")
def fim(cfg, truth, channel, profiles, combiner, noise_vars):
    return compute_fim(truth, channel, profiles, combiner, cfg.waveform,
                       cfg.arrays, noise_vars)


# ------------------------------------------------------------- derivatives

def test_factor_derivatives_match_finite_differences(cfg, truth, channel,
                                                     profiles, combiner):
    derivs = factor_derivatives(truth, channel, profiles[0], combiner,
                                cfg.waveform, cfg.arrays)

    def factors_at(shifted):
        fac = build_factor_matrices(shifted, channel, profiles[0], combiner,
                                    cfg.waveform, cfg.arrays)
        return fac.pulse_factor, fac.antenna_factor, fac.subcarrier_factor

    for k, tgt in enumerate(truth.targets):
        for field, matrices in (
                ("theta_rad", ((0, derivs.pulse_by_theta),
                               (1, derivs.antenna_by_theta))),
                ("doppler_hz", ((0, derivs.pulse_by_doppler),)),
                ("delay_s", ((2, derivs.subcarrier_by_delay),))):
            value = getattr(tgt, field)
            h = 1e-7 * abs(value)
            plus = dataclasses.replace(truth, targets=tuple(
                dataclasses.replace(t, **{field: value + h}) if i == k else t
                for i, t in enumerate(truth.targets)))
            minus = dataclasses.replace(truth, targets=tuple(
                dataclasses.replace(t, **{field: value - h}) if i == k else t
                for i, t in enumerate(truth.targets)))
            fp, fm = factors_at(plus), factors_at(minus)
            for mode, analytic in matrices:
                fd = (fp[mode][:, k] - fm[mode][:, k]) / (2 * h)
                num = np.linalg.norm(analytic[:, k] - fd)
                den = np.linalg.norm(analytic[:, k])
                assert num / den < 1e-6, (field, mode, num / den)


def test_first_array_element_has_no_angle_sensitivity(cfg):
    d = steering_derivative(0.3, cfg.arrays.n_irs_elements,
                            cfg.arrays.element_spacing_m,
                            cfg.arrays.wavelength_m)
    assert d[0] == 0.0


def test_tone_rate_at_zero_delay(cfg, truth, channel, profiles, combiner):
    """First subcarrier of a zero-delay unit-gain target: rate -j*pi*1e6."""
    tgt = dataclasses.replace(truth.targets[0], delay_s=0.0, gain=1.0 + 0j)
    shifted = dataclasses.replace(truth, targets=(tgt,))
    derivs = factor_derivatives(shifted, channel, profiles[0], combiner,
                                cfg.waveform, cfg.arrays)
    expected = -2j * np.pi * cfg.waveform.subcarrier_spacing_hz
    assert derivs.subcarrier_by_delay[0, 0] == pytest.approx(expected)
    assert expected == pytest.approx(-1j * math.pi * 1e6)


def test_pulse_rate_scaling(cfg, truth, channel, profiles, combiner):
    derivs = factor_derivatives(truth, channel, profiles[0], combiner,
                                cfg.waveform, cfg.arrays)
    pulse = derivs.factors[0]
    rates = derivs.pulse_by_doppler / pulse
    p = np.arange(1, cfg.waveform.n_pulses + 1)
    expected = 2j * np.pi * p * cfg.waveform.pri_s
    for k in range(pulse.shape[1]):
        np.testing.assert_allclose(rates[:, k], expected, rtol=1e-12)


# ------------------------------------------------------------- index pairing

def test_noise_cov_map_same_mode_is_identity():
    pairs = noise_cov_map((2, 2), (3, 4, 2))
    assert np.array_equal(pairs[:, 0], pairs[:, 1])


def test_noise_cov_map_cross_mode_example():
    pairs = noise_cov_map((1, 2), (2, 2, 2))
    # entries enumerate (p, m, l) with l fastest; (1, 2, 1) is row 2
    assert tuple(pairs[2]) == (2, 5)


def test_noise_cov_map_columns_are_permutations():
    dims = (3, 2, 4)
    total = dims[0] * dims[1] * dims[2]
    for j1 in (1, 2, 3):
        for j2 in (1, 2, 3):
            pairs = noise_cov_map((j1, j2), dims)
            assert set(pairs[:, 0]) == set(range(1, total + 1))
            assert set(pairs[:, 1]) == set(range(1, total + 1))


def test_noise_cov_map_rejects_bad_mode():
    with pytest.raises(ValueError):
        noise_cov_map((0, 2), (2, 2, 2))


# ------------------------------------------------------------- score

def test_score_zero_at_truth_without_noise(cfg, truth, channel, profiles,
                                           combiner, noise_vars):
    observed = model_tensors(truth, channel, profiles, combiner, cfg.waveform,
                             cfg.arrays)
    values = score(truth, observed, channel, profiles, combiner, cfg.waveform,
                   cfg.arrays, noise_vars)
    assert np.all(values == 0.0)


def _noisy_observed(cfg, truth, channel, profiles, combiner, noise_vars, seed):
    rng = np.random.default_rng(seed)
    observed = []
    for model, sigma_sq in zip(
            model_tensors(truth, channel, profiles, combiner, cfg.waveform,
                          cfg.arrays), noise_vars):
        sigma = math.sqrt(sigma_sq)
        noise = sigma / math.sqrt(2) * (rng.standard_normal(model.shape)
                                        + 1j * rng.standard_normal(model.shape))
        observed.append(model + noise)
    return observed


def test_score_matches_finite_differences(cfg, truth, channel, profiles,
                                          combiner, noise_vars):
    observed = _noisy_observed(cfg, truth, channel, profiles, combiner,
                               noise_vars, seed=17)
    worst = score_fd_check(truth, observed, channel, profiles, combiner,
                           cfg.waveform, cfg.arrays, noise_vars)
    assert worst < 1e-4, f"worst relative gap {worst:.3e}"


def test_score_check_detects_corrupted_gradient(cfg, truth, channel, profiles,
                                                combiner, noise_vars,
                                                monkeypatch):
    """The consistency check must fail when the analytic side is wrong."""
    observed = _noisy_observed(cfg, truth, channel, profiles, combiner,
                               noise_vars, seed=17)
    real = crb_mod.factor_derivatives

    def corrupted(*args, **kwargs):
        d = real(*args, **kwargs)
        return dataclasses.replace(d, pulse_by_theta=1.05 * d.pulse_by_theta)

    monkeypatch.setattr(crb_mod, "factor_derivatives", corrupted)
    worst = score_fd_check(truth, observed, channel, profiles, combiner,
                           cfg.waveform, cfg.arrays, noise_vars)
    assert worst > 1e-4


def test_score_covariance_estimates_information(cfg):
    """Sample covariance of the score approaches the information matrix."""
    wf = dataclasses.replace(cfg.waveform, n_pulses=4, n_subcarriers=4)
    arrays = ArrayConfig(n_ap_antennas=4,
                         n_irs_elements=cfg.arrays.n_irs_elements,
                         wavelength_m=wf.wavelength_m)
    rng = np.random.default_rng(7)
    truth = derive_target_truth(cfg.scene, wf, arrays, rng)
    truth = dataclasses.replace(truth, targets=truth.targets[:1])
    rng2 = np.random.default_rng(7)
    derive_target_truth(cfg.scene, wf, arrays, rng2)
    channel = build_los_channel(cfg.scene, arrays, rng2)
    from irs_sensing.scene import design_phase_profiles
    profiles = design_phase_profiles(cfg.scene.doa_prior_rad, arrays,
                                     cfg.scene.n_subarrays)
    combiner = design_beamformers(channel, wf.n_pulses)
    tensors = [synthesize_echo_tensor(build_factor_matrices(
        truth, channel, p, combiner, wf, arrays)) for p in profiles]
    noise_vars = tuple(noise_sigma_for_snr(t, 0.0) ** 2 for t in tensors)
    fim = compute_fim(truth, channel, profiles, combiner, wf, arrays,
                      noise_vars)
    sample = mc_score_covariance(truth, channel, profiles, combiner, wf,
                                 arrays, noise_vars, n_draws=10_000,
                                 rng=np.random.default_rng(123))
    rel = (np.linalg.norm(sample - fim.omega)
           / np.linalg.norm(fim.omega))
    assert rel < 0.05, f"relative covariance gap {rel:.4f}"


# ------------------------------------------------------------- information matrix

def test_fim_is_symmetric_psd(fim):
    assert np.array_equal(fim.omega, fim.omega.T)
    eigs = np.linalg.eigvalsh(fim.omega)
    assert eigs[0] >= -1e-10 * eigs[-1]
    assert np.isfinite(fim.condition_number)
    assert fim.condition_number < FIM_CONDITION_LIMIT


def test_fim_scales_inversely_with_noise(cfg, truth, channel, profiles,
                                         combiner, noise_vars, fim):
    louder = tuple(10.0 * s for s in noise_vars)
    scaled = compute_fim(truth, channel, profiles, combiner, cfg.waveform,
                         cfg.arrays, louder)
    np.testing.assert_allclose(scaled.omega, fim.omega / 10.0, rtol=1e-12)


def test_fim_adds_over_phases(cfg, truth, channel, profiles, combiner,
                              noise_vars, fim):
    parts = [compute_fim(truth, channel, profiles[i:i + 1], combiner,
                         cfg.waveform, cfg.arrays, noise_vars[i:i + 1]).omega
             for i in (0, 1)]
    np.testing.assert_allclose(parts[0] + parts[1], fim.omega, rtol=1e-12)


def test_fim_input_validation(cfg, truth, channel, profiles, combiner,
                              noise_vars):
    with pytest.raises(ValueError):
        compute_fim(truth, channel, profiles, combiner, cfg.waveform,
                    cfg.arrays, noise_vars[:1])
    with pytest.raises(ValueError):
        compute_fim(truth, channel, profiles, combiner, cfg.waveform,
                    cfg.arrays, (noise_vars[0], 0.0))


# ------------------------------------------------------------- bounds

def test_crb_positive_and_dominates_reciprocal_diagonal(fim):
    bounds = compute_crb(fim)
    stacked = np.concatenate([bounds.theta, bounds.doppler, bounds.delay])
    assert np.all(stacked > 0)
    recip = 1.0 / np.diag(fim.omega)
    assert np.all(stacked >= recip * (1 - 1e-12))


def test_crb_linear_in_noise_power(cfg, truth, channel, profiles, combiner,
                                   noise_vars, fim):
    base = compute_crb(fim)
    doubled = compute_crb(compute_fim(
        truth, channel, profiles, combiner, cfg.waveform, cfg.arrays,
        tuple(2.0 * s for s in noise_vars)))
    for name in ("theta", "doppler", "delay"):
        ratio = getattr(doubled, name) / getattr(base, name)
        np.testing.assert_allclose(ratio, 2.0, rtol=0.02)


def test_crb_doppler_improves_with_more_pulses(cfg, truth, channel, profiles,
                                               noise_vars):
    def doppler_bound(n_pulses):
        wf = dataclasses.replace(cfg.waveform, n_pulses=n_pulses)
        comb = design_beamformers(channel, n_pulses)
        fim = compute_fim(truth, channel, profiles, comb, wf, cfg.arrays,
                          noise_vars)
        return compute_crb(fim).doppler.mean()

    assert doppler_bound(20) < doppler_bound(10) / 2


def test_singular_fim_raises(cfg, truth, channel, profiles, combiner,
                             noise_vars):
    twin = dataclasses.replace(truth,
                               targets=(truth.targets[0], truth.targets[0]))
    fim = compute_fim(twin, channel, profiles, combiner, cfg.waveform,
                      cfg.arrays, noise_vars)
    with pytest.raises(SingularFim):
        compute_crb(fim)


def test_parameter_index_layout():
    assert parameter_index("theta", 0, 2) == 0
    assert parameter_index("doppler", 1, 2) == 3
    assert parameter_index("delay", 1, 2) == 5


def test_log_likelihood_peaks_at_truth(cfg, truth, channel, profiles,
                                       combiner, noise_vars):
    observed = model_tensors(truth, channel, profiles, combiner, cfg.waveform,
                             cfg.arrays)
    at_truth = log_likelihood(observed, observed, noise_vars)
    assert at_truth == 0.0
    shifted = crb_mod._shifted_truth(truth, 0, 1e-4)
    off = log_likelihood(observed,
                         model_tensors(shifted, channel, profiles, combiner,
                                       cfg.waveform, cfg.arrays), noise_vars)
    assert off < at_truth
