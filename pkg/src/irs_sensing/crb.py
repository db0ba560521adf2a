"""Fisher information and estimation-variance lower bounds.

The observation is a pair of rank-structured tensors in white complex
Gaussian noise; the unknowns are each target's direction, Doppler shift,
and delay, with channel gains and noise power treated as known.  Because
every parameter enters through one or two factor-matrix columns, every
information entry factorizes into products of per-mode inner products,
which keeps the assembly exact and cheap.  Analytic derivatives are
validated against finite differences of the log-likelihood, and the full
matrix against the empirical covariance of the score.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .config import ArrayConfig, WaveformConfig
from .cpd import flat_index
from .errors import SingularFim
from .scene import (ChannelMatrix, PhaseProfile, SceneTruth,
                    steering_derivative, steering_vector)
from .synthesis import (GroundTruthFactors, build_factor_matrices,
                        delay_signature, doppler_ramp)

FIM_CONDITION_LIMIT = 1e14

PARAMETER_BLOCKS = ("theta", "doppler", "delay")


def parameter_index(block: str, k: int, n_targets: int) -> int:
    """Position of (parameter family, target) in the stacked vector.

    Ordering is all directions, then all Dopplers, then all delays,
    each block in target order.
    """
    return PARAMETER_BLOCKS.index(block) * n_targets + k


@dataclass(frozen=True)
class FactorDerivatives:
    """Analytic column derivatives of one phase's factor matrices.

    ``factors`` holds the (pulse, antenna, subcarrier) matrices at the
    evaluation point; each derivative matrix stacks the per-target
    derivative columns of the matrix named in the attribute.
    """

    factors: tuple[np.ndarray, np.ndarray, np.ndarray]
    pulse_by_theta: np.ndarray
    antenna_by_theta: np.ndarray
    pulse_by_doppler: np.ndarray
    subcarrier_by_delay: np.ndarray

    def channels(self, block: str) -> list[tuple[int, np.ndarray]]:
        """(mode, derivative matrix) pairs affected by a parameter family."""
        if block == "theta":
            return [(0, self.pulse_by_theta), (1, self.antenna_by_theta)]
        if block == "doppler":
            return [(0, self.pulse_by_doppler)]
        if block == "delay":
            return [(2, self.subcarrier_by_delay)]
        raise ValueError(f"unknown parameter block {block!r}")


@dataclass(frozen=True)
class FimMatrix:
    """Real symmetric information matrix over the stacked parameters."""

    omega: np.ndarray
    n_targets: int
    noise_variances: tuple[float, ...]
    condition_number: float


@dataclass(frozen=True)
class CrbBounds:
    """Per-target variance lower bounds, one array per parameter family."""

    theta: np.ndarray   # rad^2
    doppler: np.ndarray  # Hz^2
    delay: np.ndarray   # s^2


def factor_derivatives(truth: SceneTruth, channel: ChannelMatrix,
                       profile: PhaseProfile, combiner: np.ndarray,
                       waveform: WaveformConfig,
                       arrays: ArrayConfig) -> FactorDerivatives:
    """Analytic derivatives of one phase's factors at the true parameters.

    Direction enters the antenna factor through the relayed steering
    vector and the pulse factor through the combined response; Doppler
    multiplies each pulse entry by its ramp rate; delay multiplies each
    subcarrier entry by its tone rate.  Gains are held fixed.
    """
    k_total = len(truth.targets)
    n_pulses = waveform.n_pulses
    m_ant = combiner.shape[0]
    l_sub = waveform.n_subcarriers
    pulse = np.zeros((n_pulses, k_total), dtype=complex)
    antenna = np.zeros((m_ant, k_total), dtype=complex)
    subcarrier = np.zeros((l_sub, k_total), dtype=complex)
    d_pulse_theta = np.zeros_like(pulse)
    d_antenna_theta = np.zeros_like(antenna)
    d_pulse_doppler = np.zeros_like(pulse)
    d_subcarrier_delay = np.zeros_like(subcarrier)

    phase_diag = profile.diagonal()
    pulse_rate = 2j * np.pi * np.arange(1, n_pulses + 1) * waveform.pri_s
    tone_rate = (-2j * np.pi * np.arange(1, l_sub + 1)
                 * waveform.subcarrier_spacing_hz)
    for k, target in enumerate(truth.targets):
        steer = steering_vector(target.theta_rad, arrays.n_irs_elements,
                                arrays.element_spacing_m, arrays.wavelength_m)
        d_steer = steering_derivative(target.theta_rad, arrays.n_irs_elements,
                                      arrays.element_spacing_m,
                                      arrays.wavelength_m)
        b = channel.matrix.T @ (phase_diag * steer)
        db = channel.matrix.T @ (phase_diag * d_steer)
        ramp = doppler_ramp(target.doppler_hz, n_pulses, waveform.pri_s)
        antenna[:, k] = b
        d_antenna_theta[:, k] = db
        pulse[:, k] = (combiner.T @ b) * ramp
        d_pulse_theta[:, k] = (combiner.T @ db) * ramp
        d_pulse_doppler[:, k] = pulse[:, k] * pulse_rate
        sig = delay_signature(target.delay_s, l_sub,
                              waveform.subcarrier_spacing_hz)
        subcarrier[:, k] = target.gain * sig
        d_subcarrier_delay[:, k] = subcarrier[:, k] * tone_rate
    return FactorDerivatives(factors=(pulse, antenna, subcarrier),
                             pulse_by_theta=d_pulse_theta,
                             antenna_by_theta=d_antenna_theta,
                             pulse_by_doppler=d_pulse_doppler,
                             subcarrier_by_delay=d_subcarrier_delay)


def noise_cov_map(mode_pair: tuple[int, int],
                  dims: tuple[int, int, int]) -> np.ndarray:
    """Index pairing of the cross-unfolding noise covariance nonzeros.

    White tensor noise stays white under every unfolding, but the same
    scalar entry lands at a different vector position in each; the
    covariance between unfolding j1 and unfolding j2 therefore has
    exactly one nonzero per tensor entry, at the 1-based position pair
    returned here (each carrying the phase's noise variance).
    """
    j1, j2 = mode_pair
    if not (1 <= j1 <= 3 and 1 <= j2 <= 3):
        raise ValueError("unfolding modes must be 1, 2, or 3")
    n_pulses, n_ant, n_sub = dims
    pairs = np.empty((n_pulses * n_ant * n_sub, 2), dtype=int)
    pos = 0
    for p in range(1, n_pulses + 1):
        for m in range(1, n_ant + 1):
            for l in range(1, n_sub + 1):
                pairs[pos, 0] = flat_index(j1, p, m, l, dims)
                pairs[pos, 1] = flat_index(j2, p, m, l, dims)
                pos += 1
    return pairs


def _phase_information(derivs: FactorDerivatives, sigma_sq: float,
                       n_targets: int) -> np.ndarray:
    """One phase's contribution to the information matrix.

    Each parameter's tensor derivative is a sum of rank-one terms sharing
    the base factors in the unaffected modes, so every inner product is a
    product of three per-mode column inner products.
    """
    size = 3 * n_targets
    omega = np.zeros((size, size))
    for i1, block1 in enumerate(PARAMETER_BLOCKS):
        for i2, block2 in enumerate(PARAMETER_BLOCKS):
            for k1 in range(n_targets):
                for k2 in range(n_targets):
                    total = 0.0 + 0.0j
                    for mode1, deriv1 in derivs.channels(block1):
                        for mode2, deriv2 in derivs.channels(block2):
                            term = 1.0 + 0.0j
                            for mode in range(3):
                                left = deriv1 if mode == mode1 else derivs.factors[mode]
                                right = deriv2 if mode == mode2 else derivs.factors[mode]
                                term *= np.vdot(left[:, k1], right[:, k2])
                            total += term
                    omega[i1 * n_targets + k1, i2 * n_targets + k2] = \
                        (2.0 / sigma_sq) * total.real
    return omega


def compute_fim(truth: SceneTruth, channel: ChannelMatrix,
                profiles: Sequence[PhaseProfile], combiner: np.ndarray,
                waveform: WaveformConfig, arrays: ArrayConfig,
                noise_variances: Sequence[float]) -> FimMatrix:
    """Information matrix for the stacked direction/Doppler/delay vector.

    Sums the per-phase contributions and symmetrizes.  An ill-conditioned
    result is reported through the stored condition number rather than
    hidden; inversion happens only in compute_crb.
    """
    if len(profiles) != len(noise_variances):
        raise ValueError("need one noise variance per phase")
    if any(s <= 0 for s in noise_variances):
        raise ValueError("noise variances must be positive")
    n_targets = len(truth.targets)
    size = 3 * n_targets
    omega = np.zeros((size, size))
    for profile, sigma_sq in zip(profiles, noise_variances):
        derivs = factor_derivatives(truth, channel, profile, combiner,
                                    waveform, arrays)
        omega += _phase_information(derivs, sigma_sq, n_targets)
    omega = 0.5 * (omega + omega.T)
    return FimMatrix(omega=omega, n_targets=n_targets,
                     noise_variances=tuple(float(s) for s in noise_variances),
                     condition_number=_equilibrated_condition(omega))


def _equilibrated_condition(omega: np.ndarray) -> float:
    """Condition number after diagonal scaling to unit diagonal.

    The stacked parameters carry different physical units, so the raw
    matrix is badly scaled even when every parameter is comfortably
    identifiable.  Scaling by the square roots of the diagonal removes
    the unit disparity; what remains measures genuine coupling.
    """
    diag = np.diag(omega)
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        return math.inf
    scale = np.sqrt(diag)
    return float(np.linalg.cond(omega / np.outer(scale, scale)))


def compute_crb(fim: FimMatrix) -> CrbBounds:
    """Diagonal of the inverse information matrix, split by family."""
    if not np.isfinite(fim.condition_number) \
            or fim.condition_number > FIM_CONDITION_LIMIT:
        raise SingularFim(f"condition number {fim.condition_number:.3e} "
                          f"exceeds {FIM_CONDITION_LIMIT:.0e}")
    scale = np.sqrt(np.diag(fim.omega))
    scaled = fim.omega / np.outer(scale, scale)
    diag = np.diag(np.linalg.inv(scaled)) / scale ** 2
    k = fim.n_targets
    return CrbBounds(theta=diag[0:k].copy(),
                     doppler=diag[k:2 * k].copy(),
                     delay=diag[2 * k:3 * k].copy())


def model_tensors(truth: SceneTruth, channel: ChannelMatrix,
                  profiles: Sequence[PhaseProfile], combiner: np.ndarray,
                  waveform: WaveformConfig,
                  arrays: ArrayConfig) -> list[np.ndarray]:
    """Noise-free observation tensors of all phases at given parameters."""
    out = []
    for profile in profiles:
        factors: GroundTruthFactors = build_factor_matrices(
            truth, channel, profile, combiner, waveform, arrays)
        out.append(np.einsum("pk,mk,lk->pml", factors.pulse_factor,
                             factors.antenna_factor,
                             factors.subcarrier_factor))
    return out


def log_likelihood(observed: Sequence[np.ndarray],
                   modeled: Sequence[np.ndarray],
                   noise_variances: Sequence[float]) -> float:
    """Gaussian log-likelihood up to a parameter-free constant."""
    total = 0.0
    for obs, model, sigma_sq in zip(observed, modeled, noise_variances):
        total -= float(np.linalg.norm(obs - model) ** 2) / sigma_sq
    return total


def score(truth: SceneTruth, observed: Sequence[np.ndarray],
          channel: ChannelMatrix, profiles: Sequence[PhaseProfile],
          combiner: np.ndarray, waveform: WaveformConfig,
          arrays: ArrayConfig,
          noise_variances: Sequence[float]) -> np.ndarray:
    """Analytic gradient of the log-likelihood at the given parameters."""
    n_targets = len(truth.targets)
    values = np.zeros(3 * n_targets)
    for phase_pos, profile in enumerate(profiles):
        derivs = factor_derivatives(truth, channel, profile, combiner,
                                    waveform, arrays)
        pulse, antenna, subcarrier = derivs.factors
        model = np.einsum("pk,mk,lk->pml", pulse, antenna, subcarrier)
        resid = observed[phase_pos] - model
        sigma_sq = noise_variances[phase_pos]
        for block in PARAMETER_BLOCKS:
            for k in range(n_targets):
                inner = 0.0 + 0.0j
                for mode, deriv in derivs.channels(block):
                    cols = [deriv[:, k] if mode == m else derivs.factors[m][:, k]
                            for m in range(3)]
                    inner += np.einsum("p,m,l,pml->", cols[0].conj(),
                                       cols[1].conj(), cols[2].conj(), resid)
                values[parameter_index(block, k, n_targets)] += \
                    (2.0 / sigma_sq) * inner.real
    return values


def _shifted_truth(truth: SceneTruth, index: int, delta: float) -> SceneTruth:
    """Copy of the truth with one stacked parameter moved by delta."""
    n_targets = len(truth.targets)
    block = PARAMETER_BLOCKS[index // n_targets]
    k = index % n_targets
    field = {"theta": "theta_rad", "doppler": "doppler_hz",
             "delay": "delay_s"}[block]
    targets = list(truth.targets)
    targets[k] = replace(targets[k], **{field: getattr(targets[k], field) + delta})
    return replace(truth, targets=tuple(targets))


def parameter_steps(truth: SceneTruth, base_step: float) -> np.ndarray:
    """Per-parameter finite-difference steps scaled to parameter size."""
    n_targets = len(truth.targets)
    values = np.concatenate([truth.thetas(), truth.dopplers(), truth.delays()])
    steps = np.empty(3 * n_targets)
    for j, value in enumerate(values):
        scale = abs(value) if abs(value) > 0 else 1.0
        steps[j] = base_step * scale
    return steps


def score_fd_check(truth: SceneTruth, observed: Sequence[np.ndarray],
                   channel: ChannelMatrix, profiles: Sequence[PhaseProfile],
                   combiner: np.ndarray, waveform: WaveformConfig,
                   arrays: ArrayConfig, noise_variances: Sequence[float],
                   base_step: float = 1e-6) -> float:
    """Worst relative gap between analytic and finite-difference scores.

    Central differences of the log-likelihood, one parameter at a time,
    with steps proportional to each parameter's magnitude.
    """
    analytic = score(truth, observed, channel, profiles, combiner, waveform,
                     arrays, noise_variances)
    steps = parameter_steps(truth, base_step)
    worst = 0.0
    for j, step in enumerate(steps):
        plus = log_likelihood(observed,
                              model_tensors(_shifted_truth(truth, j, +step),
                                            channel, profiles, combiner,
                                            waveform, arrays),
                              noise_variances)
        minus = log_likelihood(observed,
                               model_tensors(_shifted_truth(truth, j, -step),
                                             channel, profiles, combiner,
                                             waveform, arrays),
                               noise_variances)
        fd = (plus - minus) / (2 * step)
        denom = max(abs(analytic[j]), abs(fd))
        if denom > 0:
            worst = max(worst, abs(analytic[j] - fd) / denom)
    return worst


def mc_score_covariance(truth: SceneTruth, channel: ChannelMatrix,
                        profiles: Sequence[PhaseProfile], combiner: np.ndarray,
                        waveform: WaveformConfig, arrays: ArrayConfig,
                        noise_variances: Sequence[float], n_draws: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Empirical covariance of the score over noise draws.

    The score is linear in the noise, so each parameter reduces to a fixed
    tensor contracted with the draw; the sample covariance of the stacked
    scores estimates the information matrix.
    """
    n_targets = len(truth.targets)
    size = 3 * n_targets
    scores = np.zeros((size, n_draws))
    for phase_pos, profile in enumerate(profiles):
        derivs = factor_derivatives(truth, channel, profile, combiner,
                                    waveform, arrays)
        sigma_sq = noise_variances[phase_pos]
        sigma = math.sqrt(sigma_sq)
        templates = np.zeros((size,) + derivs.factors[0].shape[:1]
                             + derivs.factors[1].shape[:1]
                             + derivs.factors[2].shape[:1], dtype=complex)
        for block in PARAMETER_BLOCKS:
            for k in range(n_targets):
                j = parameter_index(block, k, n_targets)
                for mode, deriv in derivs.channels(block):
                    cols = [deriv[:, k] if mode == m else derivs.factors[m][:, k]
                            for m in range(3)]
                    templates[j] += np.einsum("p,m,l->pml", *cols)
        flat = templates.reshape(size, -1)
        shape = (n_draws, flat.shape[1])
        noise = sigma / math.sqrt(2) * (rng.standard_normal(shape)
                                        + 1j * rng.standard_normal(shape))
        scores += (2.0 / sigma_sq) * (flat.conj() @ noise.T).real
    centered = scores - scores.mean(axis=1, keepdims=True)
    return centered @ centered.T / (n_draws - 1)
