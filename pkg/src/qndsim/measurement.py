"""Single-photon interferometric detection of the total |1> population.

A photon traversing both samples picks up a phase (N1 + N2)/2 - (M1 + M2)
times chi_tau in the lower arm. The two output ports D+ and D- then apply the
diagonal Kraus factors F+/-(M1 + M2) to the joint amplitudes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ImpossibleOutcomeError, InvalidArgumentError, InvalidStateError
from .spin import JointAmplitudes

UNNORMALIZED_TOL = 1e-6
IMPOSSIBLE_PROB = 1e-15


class Detector(enum.Enum):
    PLUS = "+"
    MINUS = "-"

    @property
    def sign(self) -> int:
        return 1 if self is Detector.PLUS else -1


def _as_detector(detector) -> Detector:
    if isinstance(detector, Detector):
        return detector
    aliases = {"+": Detector.PLUS, "plus": Detector.PLUS, 1: Detector.PLUS,
               "-": Detector.MINUS, "minus": Detector.MINUS, -1: Detector.MINUS}
    try:
        return aliases[detector]
    except (KeyError, TypeError):
        raise InvalidArgumentError(f"unknown detector {detector!r}") from None


@dataclass(frozen=True)
class ClickRecord:
    photon_index: int
    detector: Detector
    probability: float
    chi_tau: float

    def __post_init__(self):
        if not 0.0 < self.probability <= 1.0 + 1e-12:
            raise InvalidArgumentError(f"click probability {self.probability} not in (0, 1]")


def _phase_grid(state: JointAmplitudes, chi_tau: float) -> np.ndarray:
    """Photon phase [(N1 + N2)/2 - (M1 + M2)] * chi_tau per grid cell."""
    n_total = state.basis_1.atom_count + state.basis_2.atom_count
    return (n_total / 2 - state.m12_grid()) * chi_tau


def _check_normalized(state: JointAmplitudes) -> float:
    norm_sq = state.norm_sq
    if abs(norm_sq - 1.0) > UNNORMALIZED_TOL:
        raise InvalidStateError(f"state is not normalized (squared norm {norm_sq!r})")
    return norm_sq


def click_probabilities(state: JointAmplitudes, chi_tau: float) -> tuple[float, float]:
    if not math.isfinite(chi_tau):
        raise InvalidArgumentError(f"chi_tau must be finite, got {chi_tau!r}")
    _check_normalized(state)
    pops = np.abs(state.amps) ** 2
    half_phase = _phase_grid(state, chi_tau) / 2
    p_plus = float(np.sum(pops * np.cos(half_phase) ** 2))
    p_minus = float(np.sum(pops * np.sin(half_phase) ** 2))
    total = p_plus + p_minus
    return p_plus / total, p_minus / total


def entangling_factor(m12, n_total_atoms: int, chi_tau: float, sign) -> complex:
    """(1 +/- exp(-i[(N1+N2)/2 - (M1+M2)] chi_tau)) / 2. Vectorized over ``m12``."""
    sgn = _as_detector(sign).sign
    m12 = np.asarray(m12, dtype=float)
    if np.any(np.abs(m12) > n_total_atoms / 2 + 1e-12):
        raise InvalidArgumentError(f"|m12| exceeds the total spin {n_total_atoms / 2}")
    val = (1 + sgn * np.exp(-1j * (n_total_atoms / 2 - m12) * chi_tau)) / 2
    return complex(val) if val.ndim == 0 else val


def factor_grid(state: JointAmplitudes, chi_tau: float, detector) -> np.ndarray:
    """F+/-(M1 + M2) over the whole amplitude grid."""
    sgn = _as_detector(detector).sign
    return (1 + sgn * np.exp(-1j * _phase_grid(state, chi_tau))) / 2


def _project(state: JointAmplitudes, factors: np.ndarray) -> tuple[JointAmplitudes, float]:
    unnormalized = state.amps * factors
    prob = float(np.vdot(unnormalized, unnormalized).real)
    if prob < IMPOSSIBLE_PROB:
        raise ImpossibleOutcomeError(f"outcome has probability {prob:.3g}")
    return JointAmplitudes(state.basis_1, state.basis_2, unnormalized / math.sqrt(prob)), prob


def project_on_click(state: JointAmplitudes, detector, chi_tau: float) -> JointAmplitudes:
    """Post-detection state, renormalized."""
    _check_normalized(state)
    projected, _ = _project(state, factor_grid(state, chi_tau, detector))
    return projected


def sample_click(
    state: JointAmplitudes,
    chi_tau: float,
    rng: np.random.Generator,
    photon_index: int = 1,
    factors: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[ClickRecord, JointAmplitudes]:
    """Draw one detection by Born's rule and return it with the updated state.

    Exactly one uniform variate is consumed per call, even when an outcome is
    certain, so seeded streams stay aligned across parameter changes.
    ``factors`` may carry precomputed (F+, F-) grids for the state's bases.
    """
    if factors is None:
        p_plus, _ = click_probabilities(state, chi_tau)
    else:
        _check_normalized(state)
        pops = np.abs(state.amps) ** 2
        w_plus = float(np.sum(pops * np.abs(factors[0]) ** 2))
        w_minus = float(np.sum(pops * np.abs(factors[1]) ** 2))
        p_plus = w_plus / (w_plus + w_minus)
    u = rng.random()
    detector = Detector.PLUS if u < p_plus else Detector.MINUS
    if factors is None:
        grid = factor_grid(state, chi_tau, detector)
    else:
        grid = factors[0] if detector is Detector.PLUS else factors[1]
    projected, prob = _project(state, grid)
    record = ClickRecord(photon_index, detector, min(prob, 1.0), chi_tau)
    return record, projected


@dataclass(frozen=True)
class PeakPrediction:
    """Candidate maxima of the accumulated click likelihood over M1 + M2."""

    centers: tuple[float, ...]
    width_rms: float
    n_plus: int
    n_total: int


def predict_peak(n_atoms_per_sample: int, chi_tau: float, n_plus: int, n_total: int) -> PeakPrediction:
    """Solve tan((N - M)/2 * chi_tau) = +/- sqrt((n_total - n_plus)/n_plus) for M in [-N, N].

    All branches and periods are returned; choosing the one compatible with
    the state's support is left to the caller.
    """
    if n_total < 1:
        raise InvalidArgumentError(f"n_total must be >= 1, got {n_total}")
    if not 0 <= n_plus <= n_total:
        raise InvalidArgumentError(f"n_plus = {n_plus} outside [0, {n_total}]")
    if chi_tau == 0 or not math.isfinite(chi_tau):
        raise InvalidArgumentError(f"chi_tau must be finite and nonzero, got {chi_tau!r}")

    n = n_atoms_per_sample
    if n_plus == 0:
        base = math.pi / 2
    else:
        base = math.atan(math.sqrt((n_total - n_plus) / n_plus))

    # half-phase x = (N - M) chi_tau / 2 spans [0, N chi_tau] as M runs over [-N, N]
    lo, hi = sorted((0.0, n * chi_tau))
    k_min = math.floor((lo - math.pi / 2) / math.pi) - 1
    k_max = math.ceil((hi + math.pi / 2) / math.pi) + 1
    centers = set()
    for k in range(k_min, k_max + 1):
        for x in (base + k * math.pi, -base + k * math.pi):
            if lo - 1e-12 <= x <= hi + 1e-12:
                centers.add(round(n - 2 * x / chi_tau, 12))
    width = 1.0 / (abs(chi_tau) * math.sqrt(n_total))
    return PeakPrediction(tuple(sorted(centers)), width, n_plus, n_total)
