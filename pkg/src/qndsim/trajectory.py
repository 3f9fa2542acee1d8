"""Seeded quantum trajectories for the three measurement protocols.

A  repeated detection of J1z + J2z from the binomial product state.
B  detection, then opposite +/-90 degree x-rotations, then detection again.
C  an opposite x-rotation by a fixed angle before every detection.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import binomtest

from .errors import InvalidArgumentError
from .measurement import Detector, PeakPrediction, factor_grid, sample_click
from .metrics import MetricsSample, m12_distribution, measure
from .spin import (
    JointAmplitudes,
    apply_opposite_rotation,
    binomial_initial_state,
    make_basis,
    rotation_matrix,
)

CAPTURE_THRESHOLD = 0.99
SUPPORT_MASS = 0.999


class Protocol(str, enum.Enum):
    A = "a"
    B = "b"
    C = "c"


DEFAULT_ANGLES = {Protocol.A: 0.0, Protocol.B: math.pi / 2, Protocol.C: math.pi / 5}


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: Protocol = Protocol.C
    atoms_per_sample_1: int = 20
    atoms_per_sample_2: int | None = None  # None: same as sample 1
    chi_tau: float = 0.24
    photons_phase1: int = 500
    photons_phase2: int = 500
    rotation_angle: float | None = None  # None: protocol default
    seed: int = 0
    trajectories: int = 50
    record_stride: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "protocol", Protocol(self.protocol))
        except ValueError:
            raise InvalidArgumentError(f"protocol: unknown protocol {self.protocol!r}") from None
        _check_int("atoms_per_sample_1", self.atoms_per_sample_1, 1)
        if self.atoms_per_sample_2 is not None:
            _check_int("atoms_per_sample_2", self.atoms_per_sample_2, 1)
        _check_int("photons_phase1", self.photons_phase1, 1)
        _check_int("photons_phase2", self.photons_phase2, 1)
        _check_int("trajectories", self.trajectories, 1)
        _check_int("record_stride", self.record_stride, 1)
        _check_int("seed", self.seed, 0)
        if self.seed >= 2**64:
            raise InvalidArgumentError("seed: must fit in 64 unsigned bits")
        if not isinstance(self.chi_tau, (int, float)) or not math.isfinite(self.chi_tau) or self.chi_tau == 0:
            raise InvalidArgumentError(f"chi_tau: must be finite and nonzero, got {self.chi_tau!r}")
        if self.rotation_angle is not None and (
            not isinstance(self.rotation_angle, (int, float)) or not math.isfinite(self.rotation_angle)
        ):
            raise InvalidArgumentError(f"rotation_angle: must be finite, got {self.rotation_angle!r}")

    @property
    def atoms_2(self) -> int:
        return self.atoms_per_sample_1 if self.atoms_per_sample_2 is None else self.atoms_per_sample_2

    @property
    def angle(self) -> float:
        if self.rotation_angle is None:
            return DEFAULT_ANGLES[self.protocol]
        return float(self.rotation_angle)

    @property
    def total_photons(self) -> int:
        if self.protocol is Protocol.B:
            return self.photons_phase1 + self.photons_phase2
        return self.photons_phase1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["protocol"] = self.protocol.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProtocolConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidArgumentError(f"{sorted(unknown)[0]}: unknown config field")
        return cls(**d)


def _check_int(name: str, value, minimum: int) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < minimum:
        raise InvalidArgumentError(f"{name}: must be an integer >= {minimum}, got {value!r}")


@dataclass
class TrajectoryTrace:
    """Recorded time series of one trajectory.

    ``photon_index``, ``detector`` (+1/-1) and ``metrics`` (one row per
    recorded click, columns in ``MetricsSample.FIELDS`` order) are parallel
    arrays.
    """

    trajectory_id: int
    photon_index: np.ndarray
    detector: np.ndarray
    metrics: np.ndarray
    final_metrics: MetricsSample
    n_plus_total: int
    rotation_after: int | None = None
    phase1_metrics: MetricsSample | None = None
    final_state: JointAmplitudes | None = field(default=None, repr=False)

    @property
    def rows(self) -> list[tuple[int, Detector, MetricsSample]]:
        return [
            (int(k), Detector.PLUS if d > 0 else Detector.MINUS, MetricsSample(*m))
            for k, d, m in zip(self.photon_index, self.detector, self.metrics)
        ]

    @property
    def final_state_summary(self) -> tuple[float, float, int]:
        return self.final_metrics.entropy_bits, self.final_metrics.overlap_psi0, self.n_plus_total

    def column(self, name: str) -> np.ndarray:
        return self.metrics[:, MetricsSample.FIELDS.index(name)]


class _Recorder:
    def __init__(self, total: int, stride: int):
        self.total = total
        self.stride = stride
        self.index: list[int] = []
        self.detector: list[int] = []
        self.rows: list[tuple[float, ...]] = []
        self.n_plus = 0

    def click(self, k: int, detector: Detector, state: JointAmplitudes) -> None:
        if detector is Detector.PLUS:
            self.n_plus += 1
        if k % self.stride == 0 or k == self.total:
            self.index.append(k)
            self.detector.append(detector.sign)
            self.rows.append(measure(state).as_tuple())

    def trace(self, trajectory_id: int, state: JointAmplitudes, **extra) -> TrajectoryTrace:
        return TrajectoryTrace(
            trajectory_id=trajectory_id,
            photon_index=np.array(self.index, dtype=np.int64),
            detector=np.array(self.detector, dtype=np.int8),
            metrics=np.array(self.rows, dtype=float).reshape(-1, len(MetricsSample.FIELDS)),
            final_metrics=measure(state),
            n_plus_total=self.n_plus,
            final_state=state,
            **extra,
        )


def _setup(config: ProtocolConfig):
    basis_1 = make_basis(config.atoms_per_sample_1)
    basis_2 = make_basis(config.atoms_2)
    state = binomial_initial_state(basis_1, basis_2)
    factors = (
        factor_grid(state, config.chi_tau, Detector.PLUS),
        factor_grid(state, config.chi_tau, Detector.MINUS),
    )
    return state, factors


def _rotations(state: JointAmplitudes, angle: float) -> tuple[np.ndarray, np.ndarray]:
    return (
        rotation_matrix(state.basis_1, angle).matrix,
        rotation_matrix(state.basis_2, -angle).matrix,
    )


def _require(config: ProtocolConfig, protocol: Protocol) -> None:
    if config.protocol is not protocol:
        raise InvalidArgumentError(f"protocol: expected {protocol.value!r}, got {config.protocol.value!r}")


def run_protocol_a(config: ProtocolConfig, rng: np.random.Generator, trajectory_id: int = 0) -> TrajectoryTrace:
    _require(config, Protocol.A)
    state, factors = _setup(config)
    rec = _Recorder(config.total_photons, config.record_stride)
    for k in range(1, config.photons_phase1 + 1):
        click, state = sample_click(state, config.chi_tau, rng, k, factors)
        rec.click(k, click.detector, state)
    return rec.trace(trajectory_id, state)


def run_protocol_b(config: ProtocolConfig, rng: np.random.Generator, trajectory_id: int = 0) -> TrajectoryTrace:
    _require(config, Protocol.B)
    state, factors = _setup(config)
    rec = _Recorder(config.total_photons, config.record_stride)
    for k in range(1, config.photons_phase1 + 1):
        click, state = sample_click(state, config.chi_tau, rng, k, factors)
        rec.click(k, click.detector, state)
    phase1 = measure(state)
    state = apply_opposite_rotation(state, *_rotations(state, config.angle))
    for k in range(config.photons_phase1 + 1, config.total_photons + 1):
        click, state = sample_click(state, config.chi_tau, rng, k, factors)
        rec.click(k, click.detector, state)
    return rec.trace(trajectory_id, state, rotation_after=config.photons_phase1, phase1_metrics=phase1)


def run_protocol_c(config: ProtocolConfig, rng: np.random.Generator, trajectory_id: int = 0) -> TrajectoryTrace:
    _require(config, Protocol.C)
    state, factors = _setup(config)
    rot_1, rot_2 = _rotations(state, config.angle)
    rec = _Recorder(config.total_photons, config.record_stride)
    for k in range(1, config.photons_phase1 + 1):
        state = apply_opposite_rotation(state, rot_1, rot_2)
        click, state = sample_click(state, config.chi_tau, rng, k, factors)
        rec.click(k, click.detector, state)
    return rec.trace(trajectory_id, state)


RUNNERS = {Protocol.A: run_protocol_a, Protocol.B: run_protocol_b, Protocol.C: run_protocol_c}


def trajectory_rng(seed: int, trajectory_id: int) -> np.random.Generator:
    """Independent stream for one trajectory, derived from (seed, trajectory_id) only."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trajectory_id,)))


def run_trajectory(config: ProtocolConfig, trajectory_id: int, keep_state: bool = False) -> TrajectoryTrace:
    trace = RUNNERS[config.protocol](config, trajectory_rng(config.seed, trajectory_id), trajectory_id)
    if not keep_state:
        trace.final_state = None
    return trace


@dataclass
class BatchResult:
    config: ProtocolConfig
    traces: list[TrajectoryTrace]
    photon_index: np.ndarray
    mean_metrics: np.ndarray  # rows aligned with photon_index, columns MetricsSample.FIELDS
    capture_count: int
    capture_fraction: float
    capture_ci: tuple[float, float]

    def mean_column(self, name: str) -> np.ndarray:
        return self.mean_metrics[:, MetricsSample.FIELDS.index(name)]


def capture_statistic(final_overlaps, threshold: float = CAPTURE_THRESHOLD) -> tuple[int, float, tuple[float, float]]:
    """Count of captured trajectories, their fraction and the exact 95% binomial interval."""
    overlaps = np.asarray(final_overlaps, dtype=float)
    n = len(overlaps)
    if n == 0 or np.all(np.isnan(overlaps)):
        return 0, math.nan, (math.nan, math.nan)
    k = int(np.sum(overlaps >= threshold))
    ci = binomtest(k, n).proportion_ci(confidence_level=0.95, method="exact")
    return k, k / n, (float(ci.low), float(ci.high))


def run_batch(config: ProtocolConfig, trajectory_ids=None, keep_states: bool = False) -> BatchResult:
    """Run every trajectory of ``config`` and average the recorded curves.

    ``trajectory_ids`` restricts or reorders the run; each trace depends only on
    (seed, id), so the order is irrelevant to the per-trajectory results.
    """
    ids = range(config.trajectories) if trajectory_ids is None else list(trajectory_ids)
    traces = [run_trajectory(config, t, keep_state=keep_states) for t in ids]
    traces.sort(key=lambda tr: tr.trajectory_id)
    photon_index = traces[0].photon_index
    mean_metrics = np.mean(np.stack([tr.metrics for tr in traces]), axis=0)
    k, frac, ci = capture_statistic([tr.final_metrics.overlap_psi0 for tr in traces])
    return BatchResult(config, traces, photon_index, mean_metrics, k, frac, ci)


def support_window(state: JointAmplitudes, mass: float = SUPPORT_MASS) -> tuple[float, float]:
    """Smallest M1 + M2 interval around the mode holding ``mass`` of the probability."""
    values, probs = m12_distribution(state)
    lo = hi = int(np.argmax(probs))
    total = probs[lo]
    while total < mass and (lo > 0 or hi < len(probs) - 1):
        left = probs[lo - 1] if lo > 0 else -1.0
        right = probs[hi + 1] if hi < len(probs) - 1 else -1.0
        if left >= right:
            lo -= 1
            total += left
        else:
            hi += 1
            total += right
    return float(values[lo]), float(values[hi])


def compatible_centers(prediction: PeakPrediction, state: JointAmplitudes) -> list[float]:
    """Peak candidates that fall inside the state's support window."""
    lo, hi = support_window(state)
    return [c for c in prediction.centers if lo - 0.5 <= c <= hi + 0.5]
