"""Collective spin states of two atomic samples.

Each sample of N two-level atoms lives in the symmetric Dicke manifold with
J = N/2. The joint state is a dense (N1+1) x (N2+1) grid of amplitudes
A[M1, M2], rows indexed by sample 1 and columns by sample 2, with M values
increasing along each axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError

NORM_TOL = 1e-10


@dataclass(frozen=True)
class SpinBasis:
    atom_count: int

    @property
    def total_j(self) -> float:
        return self.atom_count / 2

    @property
    def dim(self) -> int:
        return self.atom_count + 1

    @cached_property
    def m_values(self) -> np.ndarray:
        m = np.arange(self.dim) - self.total_j
        m.setflags(write=False)
        return m


def make_basis(atom_count: int) -> SpinBasis:
    if isinstance(atom_count, bool) or int(atom_count) != atom_count or atom_count < 1:
        raise InvalidArgumentError(f"atom_count must be a positive integer, got {atom_count!r}")
    return SpinBasis(int(atom_count))


@dataclass(frozen=True, eq=False)
class JointAmplitudes:
    """Pure state of the two samples, ``amps[i, k]`` the amplitude of |M1_i, M2_k>."""

    basis_1: SpinBasis
    basis_2: SpinBasis
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.shape != (self.basis_1.dim, self.basis_2.dim):
            raise InvalidStateError(
                f"amplitude grid has shape {amps.shape}, "
                f"expected {(self.basis_1.dim, self.basis_2.dim)}"
            )
        object.__setattr__(self, "amps", amps)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def normalized(self) -> "JointAmplitudes":
        return JointAmplitudes(self.basis_1, self.basis_2, self.amps / math.sqrt(self.norm_sq))

    def m12_grid(self) -> np.ndarray:
        """M1 + M2 for every cell of the grid."""
        return _m12_grid(self.basis_1.atom_count, self.basis_2.atom_count)

    def fidelity(self, other: "JointAmplitudes") -> float:
        """|<self|other>|^2; insensitive to global phase."""
        if self.amps.shape != other.amps.shape:
            raise InvalidStateError("states live on different grids")
        return float(abs(np.vdot(self.amps, other.amps)) ** 2)


@lru_cache(maxsize=None)
def _m12_grid(n1: int, n2: int) -> np.ndarray:
    grid = (np.arange(n1 + 1) - n1 / 2)[:, None] + (np.arange(n2 + 1) - n2 / 2)[None, :]
    grid.setflags(write=False)
    return grid


def product_state(amps_1, amps_2, basis_1: SpinBasis, basis_2: SpinBasis) -> JointAmplitudes:
    return JointAmplitudes(basis_1, basis_2, np.outer(amps_1, amps_2)).normalized()


def dicke_state(basis_1: SpinBasis, basis_2: SpinBasis, m1: float, m2: float) -> JointAmplitudes:
    """The product eigenstate |M1=m1, M2=m2>."""
    amps = np.zeros((basis_1.dim, basis_2.dim), dtype=complex)
    i = int(round(m1 + basis_1.total_j))
    k = int(round(m2 + basis_2.total_j))
    if not (0 <= i < basis_1.dim and 0 <= k < basis_2.dim):
        raise InvalidArgumentError(f"projection ({m1}, {m2}) outside the bases")
    amps[i, k] = 1.0
    return JointAmplitudes(basis_1, basis_2, amps)


def binomial_amplitudes(basis: SpinBasis) -> np.ndarray:
    """Real amplitudes of the J_x = +J coherent state in the Dicke basis.

    A_M = 2^-J * sqrt((2J)! / ((J+M)! (J-M)!)), evaluated through log-gamma so
    that large samples do not overflow.
    """
    n = basis.atom_count
    k = np.arange(basis.dim)
    log_binom = np.array([math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1) for j in k])
    return np.exp(0.5 * log_binom - basis.total_j * math.log(2.0))


def binomial_initial_state(basis_1: SpinBasis, basis_2: SpinBasis) -> JointAmplitudes:
    return product_state(binomial_amplitudes(basis_1), binomial_amplitudes(basis_2), basis_1, basis_2)


def ladder_coefficient(j: float, m: float, direction: str) -> float:
    """sqrt(j(j+1) - m(m +/- 1)) for J_+ (``"raise"``) or J_- (``"lower"``)."""
    if abs(m) > j + 1e-12:
        raise InvalidArgumentError(f"|m| = {abs(m)} exceeds j = {j}")
    if direction == "raise":
        val = j * (j + 1) - m * (m + 1)
    elif direction == "lower":
        val = j * (j + 1) - m * (m - 1)
    else:
        raise InvalidArgumentError(f"direction must be 'raise' or 'lower', got {direction!r}")
    return math.sqrt(max(val, 0.0))


@lru_cache(maxsize=None)
def _spin_matrices(atom_count: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    basis = SpinBasis(atom_count)
    j = basis.total_j
    m = basis.m_values
    j_plus = np.zeros((basis.dim, basis.dim))
    for i in range(basis.dim - 1):
        j_plus[i + 1, i] = ladder_coefficient(j, m[i], "raise")
    jx = (j_plus + j_plus.T) / 2
    jy = (j_plus - j_plus.T) / 2j
    jz = np.diag(m).astype(float)
    for mat in (jx, jy, jz):
        mat.setflags(write=False)
    return jx, jy, jz


def spin_matrices(basis: SpinBasis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read-only (J_x, J_y, J_z) in the Dicke basis, built from ladder coefficients."""
    return _spin_matrices(basis.atom_count)


@lru_cache(maxsize=None)
def _jx_eigensystem(atom_count: int) -> tuple[np.ndarray, np.ndarray]:
    jx, _, _ = _spin_matrices(atom_count)
    # J_x is real symmetric tridiagonal, so V is real orthogonal
    evals, evecs = np.linalg.eigh(jx)
    evals.setflags(write=False)
    evecs.setflags(write=False)
    return evals, evecs


@dataclass(frozen=True, eq=False)
class RotationMatrix:
    basis: SpinBasis
    angle: float
    matrix: np.ndarray


def rotation_matrix(basis: SpinBasis, angle: float) -> RotationMatrix:
    """exp(-i angle J_x) from the eigendecomposition of J_x."""
    if not math.isfinite(angle):
        raise InvalidArgumentError(f"rotation angle must be finite, got {angle!r}")
    if angle == 0:
        return RotationMatrix(basis, 0.0, np.eye(basis.dim, dtype=complex))
    evals, evecs = _jx_eigensystem(basis.atom_count)
    mat = (evecs * np.exp(-1j * angle * evals)) @ evecs.T
    return RotationMatrix(basis, float(angle), mat)


def apply_opposite_rotation(state: JointAmplitudes, rot_1: np.ndarray, rot_2: np.ndarray) -> JointAmplitudes:
    """Apply precomputed D1(theta) (x) D2(-theta) matrices to ``state``."""
    if rot_1.shape != (state.basis_1.dim,) * 2 or rot_2.shape != (state.basis_2.dim,) * 2:
        raise InvalidStateError("rotation matrices do not match the state's bases")
    return JointAmplitudes(state.basis_1, state.basis_2, rot_1 @ state.amps @ rot_2.T)


def rotate_opposite(state: JointAmplitudes, angle: float) -> JointAmplitudes:
    """Rotate sample 1 by +angle and sample 2 by -angle about x."""
    rot_1 = rotation_matrix(state.basis_1, angle).matrix
    rot_2 = rotation_matrix(state.basis_2, -angle).matrix
    return apply_opposite_rotation(state, rot_1, rot_2)


def _expect_left(amps: np.ndarray, op: np.ndarray) -> complex:
    return np.vdot(amps, op @ amps)


def _expect_right(amps: np.ndarray, op: np.ndarray) -> complex:
    return np.vdot(amps, amps @ op.T)


def spin_expectations(state: JointAmplitudes) -> tuple[float, float, float]:
    """(<J1x - J2x>, <J1y - J2y>, <J1z + J2z>)."""
    jx1, jy1, jz1 = spin_matrices(state.basis_1)
    jx2, jy2, jz2 = spin_matrices(state.basis_2)
    a = state.amps
    x = _expect_left(a, jx1) - _expect_right(a, jx2)
    y = _expect_left(a, jy1) - _expect_right(a, jy2)
    z = _expect_left(a, jz1) + _expect_right(a, jz2)
    return float(x.real), float(y.real), float(z.real)


def casimir_expectations(state: JointAmplitudes) -> tuple[float, float]:
    """(<J1^2>, <J2^2>) evaluated from the ladder-built component matrices."""
    out = []
    for basis, expect in ((state.basis_1, _expect_left), (state.basis_2, _expect_right)):
        total = sum(expect(state.amps, op @ op) for op in spin_matrices(basis))
        out.append(float(total.real))
    return out[0], out[1]
