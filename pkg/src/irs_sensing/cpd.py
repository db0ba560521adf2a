"""Tensor unfoldings, Khatri-Rao products, and the structured CP solver.

The observation tensor has shape (pulses, antennas, subcarriers) =
(P, M, L).  One flat-index convention is shared by the unfoldings here and
the noise-covariance bookkeeping in the bound module:

    mode 1: row p, column m + l*M          (P  x LM)
    mode 2: row m, column p + l*P          (M  x LP)
    mode 3: row l, column p + m*P          (L  x MP)

with 0-based p, m, l.  In the noiseless case the unfoldings factor as
A*kr(C,B)', B*kr(C,A)', C*kr(B,A)', where kr is the column-wise Kronecker
(Khatri-Rao) product with the FIRST argument varying slowly.

The solver exploits that each subcarrier-factor column is a geometric
progression in one unit-modulus generator: a truncated SVD of the mode-1
unfolding, a shift-invariance eigenproblem for the generators, and linear
solves for the remaining factors.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (DimensionMismatch, IllConditionedShift, RankDeficient,
                     UniquenessError)

PINV_RTOL = 1e-10          # singular values below this (relative) are zeroed
RANK_GAP_TOL = 1e-12       # sigma_K / sigma_1 below this means < K components
SHIFT_COND_LIMIT = 1e12    # conditioning guard for the shift subspace solve


def unfold(data: np.ndarray, mode: int) -> np.ndarray:
    """Flatten a (P, M, L) tensor along one mode per the module convention."""
    if data.ndim != 3:
        raise DimensionMismatch(f"expected a 3-way tensor, got ndim={data.ndim}")
    if mode == 1:
        return data.transpose(0, 2, 1).reshape(data.shape[0], -1)
    if mode == 2:
        return data.transpose(1, 2, 0).reshape(data.shape[1], -1)
    if mode == 3:
        return data.transpose(2, 1, 0).reshape(data.shape[2], -1)
    raise DimensionMismatch(f"mode must be 1, 2, or 3, got {mode}")


def refold(mat: np.ndarray, mode: int, shape: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold` for the given original tensor shape."""
    p, m, l = shape
    if mode == 1:
        return mat.reshape(p, l, m).transpose(0, 2, 1)
    if mode == 2:
        return mat.reshape(m, l, p).transpose(2, 0, 1)
    if mode == 3:
        return mat.reshape(l, m, p).transpose(2, 1, 0)
    raise DimensionMismatch(f"mode must be 1, 2, or 3, got {mode}")


def flat_index(mode: int, pulse: int, antenna: int, subcarrier: int,
               dims: tuple[int, int, int]) -> int:
    """1-based flat position of entry (pulse, antenna, subcarrier) in the
    vectorized mode-``mode`` unfolding; arguments are 1-based as well."""
    p_dim, m_dim, l_dim = dims
    if not (1 <= pulse <= p_dim and 1 <= antenna <= m_dim
            and 1 <= subcarrier <= l_dim):
        raise DimensionMismatch("index out of range")
    if mode == 1:
        return antenna + (subcarrier - 1) * m_dim + (pulse - 1) * m_dim * l_dim
    if mode == 2:
        return pulse + (subcarrier - 1) * p_dim + (antenna - 1) * p_dim * l_dim
    if mode == 3:
        return pulse + (antenna - 1) * p_dim + (subcarrier - 1) * p_dim * m_dim
    raise DimensionMismatch(f"mode must be 1, 2, or 3, got {mode}")


def khatri_rao(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; rows of ``x`` vary slowly."""
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatch("column counts differ")
    return (x[:, None, :] * y[None, :, :]).reshape(-1, x.shape[1])


@dataclass(frozen=True)
class UniquenessResult:
    unique: bool
    reason: str

    def __bool__(self) -> bool:
        return self.unique


def check_uniqueness(n_pulses: int, n_antennas: int, n_subcarriers: int,
                     n_targets: int) -> UniquenessResult:
    """Identifiability of a K-component decomposition with a geometric-
    progression subcarrier factor: needs (L-1)*M >= K and P >= K."""
    if min(n_pulses, n_antennas, n_subcarriers, n_targets) < 1:
        raise DimensionMismatch("all dimensions must be positive")
    shifted = (n_subcarriers - 1) * n_antennas
    if shifted < n_targets:
        return UniquenessResult(False, f"(L-1)*M = {shifted} < K = {n_targets}")
    if n_pulses < n_targets:
        return UniquenessResult(False, f"P = {n_pulses} < K = {n_targets}")
    return UniquenessResult(True, "shift subspace and pulse mode both full rank")


@dataclass(frozen=True)
class FactorTriple:
    """Estimated CP factors for one phase plus the subcarrier generators.

    ``subcarrier_factor`` columns are rebuilt as [t, t^2, ..., t^L] from the
    unit-modulus generators — the unit leading coefficient is load-bearing:
    the cross-phase ratio statistic cancels scalings only when both phases
    share this normalization.
    """

    pulse_factor: np.ndarray       # P x K
    antenna_factor: np.ndarray     # M x K
    subcarrier_factor: np.ndarray  # L x K
    generators: np.ndarray         # K unit-modulus complex numbers

    @property
    def n_components(self) -> int:
        return self.pulse_factor.shape[1]


def raw_delay(generator: complex | np.ndarray, spacing_hz: float) -> np.ndarray:
    """Delay of a generator modulo 1/spacing, in [0, 1/spacing)."""
    period = 1.0 / spacing_hz
    return (np.angle(generator) / (-2 * np.pi * spacing_hz)) % period


def cp_decompose(data: np.ndarray, n_components: int) -> FactorTriple:
    """Recover the factor triple of a (P, M, L) tensor.

    Steps: truncated SVD of the transposed mode-1 unfolding; eigenvalue
    decomposition of the subspace shift operator for the generators;
    least-squares reconstruction of the antenna and pulse factors.
    Components are returned sorted by descending raw generator delay so
    noiseless output order is deterministic.
    """
    if data.ndim != 3:
        raise DimensionMismatch(f"expected a 3-way tensor, got ndim={data.ndim}")
    p_dim, m_dim, l_dim = data.shape
    ok = check_uniqueness(p_dim, m_dim, l_dim, n_components)
    if not ok:
        raise UniquenessError(ok.reason)

    y1 = unfold(data, 1)
    u_full, s, _ = np.linalg.svd(y1.T, full_matrices=False)
    if s[0] == 0.0:
        raise RankDeficient("zero tensor")
    if s[n_components - 1] / s[0] < RANK_GAP_TOL:
        raise RankDeficient(
            f"singular-value ratio {s[n_components - 1] / s[0]:.2e} "
            f"below {RANK_GAP_TOL:.0e}: fewer than {n_components} components")
    u = u_full[:, :n_components]

    u_low = u[:(l_dim - 1) * m_dim, :]
    u_high = u[m_dim:, :]
    cond = np.linalg.cond(u_low)
    if cond > SHIFT_COND_LIMIT:
        raise IllConditionedShift(f"shift subspace condition number {cond:.2e}")
    shift_op = np.linalg.pinv(u_low, rcond=PINV_RTOL) @ u_high
    eigvals, eigvecs = np.linalg.eig(shift_op)
    generators = eigvals / np.abs(eigvals)

    order = np.argsort(-((-np.angle(generators)) % (2 * np.pi)))
    generators = generators[order]
    eigvecs = eigvecs[:, order]

    powers = np.arange(1, l_dim + 1)
    subcarrier = np.power(generators[None, :], powers[:, None])

    antenna = np.zeros((m_dim, n_components), dtype=complex)
    for k in range(n_components):
        col = subcarrier[:, k]
        stacked = (u @ eigvecs[:, k]).reshape(l_dim, m_dim)
        antenna[:, k] = (col.conj() @ stacked) / np.real(col.conj() @ col)

    pulse = y1 @ np.linalg.pinv(khatri_rao(subcarrier, antenna).T, rcond=PINV_RTOL)
    return FactorTriple(pulse_factor=pulse, antenna_factor=antenna,
                        subcarrier_factor=subcarrier, generators=generators)


def cp_reconstruct(triple: FactorTriple) -> np.ndarray:
    """Sum of rank-one terms implied by a factor triple."""
    return np.einsum("pk,mk,lk->pml", triple.pulse_factor,
                     triple.antenna_factor, triple.subcarrier_factor)


def reconstruction_error(data: np.ndarray, triple: FactorTriple) -> float:
    """Relative Frobenius mismatch between a tensor and its factorization."""
    return float(np.linalg.norm(data - cp_reconstruct(triple))
                 / np.linalg.norm(data))


def serialize_factors(triple: FactorTriple, path: str | Path) -> None:
    """Write the three factor matrices in the flat tensor binary layout.

    Each matrix is stored as rows x cols x 1 using the same header scheme
    as tensor dumps, concatenated in pulse/antenna/subcarrier order.
    """
    from .synthesis import _write_block  # local import avoids a cycle
    with open(path, "wb") as fh:
        for idx, mat in enumerate((triple.pulse_factor, triple.antenna_factor,
                                   triple.subcarrier_factor), start=1):
            _write_block(fh, mat[:, :, None], idx)


def deserialize_factors(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read back matrices written by :func:`serialize_factors`."""
    from .synthesis import _read_block
    mats = []
    with open(path, "rb") as fh:
        for _ in range(3):
            block, _ = _read_block(fh)
            mats.append(block[:, :, 0])
    return tuple(mats)
