"""Observables of the joint two-sample state."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UnsupportedConfigurationError
from .spin import JointAmplitudes, SpinBasis, spin_expectations

EIGEN_FLOOR = 1e-14


@dataclass(frozen=True)
class MetricsSample:
    entropy_bits: float
    variance_jz_sum: float
    overlap_psi0: float  # nan unless N1 == N2
    mean_jx_diff: float
    mean_jy_diff: float
    mean_jz_sum: float

    FIELDS = ("entropy_bits", "variance_jz_sum", "overlap_psi0", "mean_jx_diff", "mean_jy_diff", "mean_jz_sum")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in self.FIELDS)


def reduced_density_matrix(state: JointAmplitudes, which: str = "sample1") -> np.ndarray:
    a = state.amps
    if which == "sample1":
        rho = a @ a.conj().T
    elif which == "sample2":
        rho = a.T @ a.conj()
    else:
        raise InvalidArgumentError(f"which must be 'sample1' or 'sample2', got {which!r}")
    return (rho + rho.conj().T) / 2


def von_neumann_entropy(rho: np.ndarray) -> float:
    """-Tr(rho log2 rho) in bits, eigenvalues below 1e-14 dropped."""
    evals = np.linalg.eigvalsh(rho)
    evals = evals[evals > EIGEN_FLOOR]
    return float(max(-np.sum(evals * np.log2(evals)), 0.0))


def entanglement_entropy(state: JointAmplitudes, which: str = "sample1") -> float:
    return von_neumann_entropy(reduced_density_matrix(state, which))


def m12_distribution(state: JointAmplitudes) -> tuple[np.ndarray, np.ndarray]:
    """Values of M1 + M2 and their probabilities (anti-diagonal sums of |A|^2)."""
    pops = np.abs(state.amps) ** 2
    d1, d2 = pops.shape
    # M1 + M2 = -(J1 + J2) + i + k, so cell (i, k) falls in bin i + k
    bins = np.add.outer(np.arange(d1), np.arange(d2)).ravel()
    probs = np.bincount(bins, weights=pops.ravel(), minlength=d1 + d2 - 1)
    values = np.arange(d1 + d2 - 1) - (state.basis_1.total_j + state.basis_2.total_j)
    return values, probs


def variance_jz_sum(state: JointAmplitudes) -> float:
    values, probs = m12_distribution(state)
    mean = np.dot(probs, values)
    return float(max(np.dot(probs, (values - mean) ** 2), 0.0))


def psi0_state(basis: SpinBasis) -> JointAmplitudes:
    """Uniform superposition of |M, -M>: the joint null state of J1x-J2x, J1y-J2y, J1z+J2z."""
    amps = np.fliplr(np.eye(basis.dim, dtype=complex)) / math.sqrt(basis.dim)
    return JointAmplitudes(basis, basis, amps)


def overlap_psi0(state: JointAmplitudes) -> float:
    if state.basis_1.atom_count != state.basis_2.atom_count:
        raise UnsupportedConfigurationError("overlap with psi0 needs equal atom counts in both samples")
    anti_diag = np.fliplr(state.amps).diagonal()
    val = abs(anti_diag.sum()) ** 2 / state.basis_1.dim
    return float(min(val, 1.0))


def measure(state: JointAmplitudes) -> MetricsSample:
    """All recorded observables for one state."""
    if state.basis_1.atom_count == state.basis_2.atom_count:
        overlap = overlap_psi0(state)
    else:
        overlap = math.nan
    jx, jy, jz = spin_expectations(state)
    return MetricsSample(
        entropy_bits=entanglement_entropy(state),
        variance_jz_sum=variance_jz_sum(state),
        overlap_psi0=overlap,
        mean_jx_diff=jx,
        mean_jy_diff=jy,
        mean_jz_sum=jz,
    )
