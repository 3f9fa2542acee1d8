import math

import numpy as np
import pytest

from oracles import accumulated_state, protocol_a_pass_probability
from qndsim.errors import InvalidArgumentError
from qndsim.measurement import predict_peak
from qndsim.metrics import m12_distribution
from qndsim.trajectory import (
    ProtocolConfig,
    capture_statistic,
    compatible_centers,
    run_batch,
    run_protocol_a,
    run_trajectory,
    support_window,
    trajectory_rng,
)


@pytest.mark.parametrize(
    "field, value",
    [("chi_tau", 0.0), ("photons_phase1", 0), ("trajectories", 0), ("record_stride", 0),
     ("atoms_per_sample_1", 0), ("seed", -1), ("chi_tau", float("inf")), ("protocol", "d")],
)
def test_config_invariants(field, value):
    with pytest.raises(InvalidArgumentError, match=field):
        ProtocolConfig(**{field: value})


def test_config_defaults():
    cfg = ProtocolConfig()
    assert cfg.chi_tau == 0.24
    assert cfg.atoms_per_sample_1 == cfg.atoms_2 == 20
    assert cfg.photons_phase1 == 500
    assert cfg.trajectories == 50
    assert cfg.angle == pytest.approx(math.pi / 5)
    assert ProtocolConfig(protocol="b").angle == pytest.approx(math.pi / 2)


def test_config_dict_roundtrip():
    cfg = ProtocolConfig(protocol="b", atoms_per_sample_2=7, rotation_angle=-1.5, seed=2**64 - 1)
    assert ProtocolConfig.from_dict(cfg.to_dict()) == cfg


def test_wrong_protocol_runner():
    with pytest.raises(InvalidArgumentError):
        run_protocol_a(ProtocolConfig(protocol="c"), np.random.default_rng(0))


@pytest.mark.parametrize("photons, stride, rows", [(500, 1, 500), (500, 10, 50), (505, 10, 51), (7, 3, 3)])
def test_row_count(photons, stride, rows):
    cfg = ProtocolConfig(protocol="a", atoms_per_sample_1=4, photons_phase1=photons, record_stride=stride)
    trace = run_trajectory(cfg, 0)
    assert len(trace.photon_index) == rows == math.ceil(photons / stride)
    assert np.all(np.diff(trace.photon_index) > 0)
    assert trace.photon_index[-1] == photons
    assert len(trace.rows) == rows


def test_protocol_a_single_atoms_matches_accumulated_oracle():
    cfg = ProtocolConfig(protocol="a", atoms_per_sample_1=1, photons_phase1=200)
    for t in range(10):
        trace = run_trajectory(cfg, t, keep_state=True)
        n_plus = trace.n_plus_total
        oracle = accumulated_state(1, 1, 0.24, n_plus, 200 - n_plus)
        oracle /= np.linalg.norm(oracle)
        assert np.max(np.abs(trace.final_state.amps - oracle)) < 1e-12


def test_protocol_a_single_atoms_pass_rate():
    cfg = ProtocolConfig(protocol="a", atoms_per_sample_1=1, photons_phase1=200, record_stride=200,
                         trajectories=300, seed=7)
    exact = protocol_a_pass_probability(1, 0.24, 200, 0.05)
    batch = run_batch(cfg)
    frac = np.mean([t.final_metrics.variance_jz_sum < 0.05 for t in batch.traces])
    sigma = math.sqrt(exact * (1 - exact) / 300)
    assert abs(frac - exact) < 4 * sigma


def test_protocol_a_pass_rate_matches_exact_enumeration():
    cfg = ProtocolConfig(protocol="a", photons_phase1=500, record_stride=500, trajectories=120, seed=11)
    exact = protocol_a_pass_probability(20, 0.24, 500, 0.05)
    assert exact == pytest.approx(0.372, abs=0.001)
    batch = run_batch(cfg)
    frac = np.mean([t.final_metrics.variance_jz_sum < 0.05 for t in batch.traces])
    assert abs(frac - exact) < 4 * math.sqrt(exact * (1 - exact) / 120)


def _photons_to_reach(chi_tau, target, horizon):
    cfg = ProtocolConfig(protocol="a", chi_tau=chi_tau, photons_phase1=horizon, trajectories=50, seed=3)
    batch = run_batch(cfg)
    var = batch.mean_column("variance_jz_sum")
    below = np.nonzero(var <= target)[0]
    assert len(below), "target variance never reached"
    return int(batch.photon_index[below[0]])


def test_weaker_coupling_needs_quadratically_more_photons():
    strong = _photons_to_reach(0.24, 1.0, 200)
    weak = _photons_to_reach(0.12, 1.0, 600)
    assert 2.5 <= weak / strong <= 6


def test_support_window_and_peak_selection():
    cfg = ProtocolConfig(protocol="a", photons_phase1=500)
    for t in range(5):
        trace = run_trajectory(cfg, t, keep_state=True)
        state = trace.final_state
        values, probs = m12_distribution(state)
        lo, hi = support_window(state)
        assert probs[(values >= lo) & (values <= hi)].sum() >= 0.999
        pred = predict_peak(20, 0.24, trace.n_plus_total, 500)
        centers = compatible_centers(pred, state)
        mode = values[np.argmax(probs)]
        assert centers
        assert min(abs(c - mode) for c in centers) < 1.0


def test_protocol_b_marks_rotation():
    cfg = ProtocolConfig(protocol="b", atoms_per_sample_1=6, photons_phase1=40, photons_phase2=30)
    trace = run_trajectory(cfg, 0)
    assert trace.rotation_after == 40
    assert len(trace.photon_index) == 70
    row = np.nonzero(trace.photon_index == 40)[0][0]
    assert trace.phase1_metrics.entropy_bits == pytest.approx(trace.column("entropy_bits")[row], abs=1e-12)


def test_protocol_b_rotation_sign_statistically_equivalent():
    base = dict(protocol="b", atoms_per_sample_1=10, photons_phase1=150, photons_phase2=150,
                trajectories=30, record_stride=50)
    plus = run_batch(ProtocolConfig(**base, rotation_angle=math.pi / 2))
    minus = run_batch(ProtocolConfig(**base, rotation_angle=-math.pi / 2, seed=99))
    e_plus = np.array([t.final_metrics.entropy_bits for t in plus.traces])
    e_minus = np.array([t.final_metrics.entropy_bits for t in minus.traces])
    pooled = math.sqrt((e_plus.var(ddof=1) + e_minus.var(ddof=1)) / 30)
    assert abs(e_plus.mean() - e_minus.mean()) < 4 * pooled


def test_protocol_c_records_overlap_bounds():
    cfg = ProtocolConfig(protocol="c", atoms_per_sample_1=6, photons_phase1=300, trajectories=4)
    batch = run_batch(cfg)
    for trace in batch.traces:
        ov = trace.column("overlap_psi0")
        ent = trace.column("entropy_bits")
        assert np.all((ov >= 0) & (ov <= 1))
        assert np.all((ent >= 0) & (ent <= math.log2(7) + 1e-9))


def test_unequal_samples_have_no_overlap():
    cfg = ProtocolConfig(protocol="c", atoms_per_sample_1=4, atoms_per_sample_2=6, photons_phase1=50)
    trace = run_trajectory(cfg, 0)
    assert np.all(np.isnan(trace.column("overlap_psi0")))
    assert np.all(trace.column("entropy_bits") <= math.log2(5) + 1e-9)


def test_rng_streams_independent_of_order():
    a = trajectory_rng(5, 3).random(4)
    trajectory_rng(5, 0).random(100)
    assert np.array_equal(a, trajectory_rng(5, 3).random(4))
    assert not np.array_equal(a, trajectory_rng(5, 2).random(4))
    assert not np.array_equal(a, trajectory_rng(6, 3).random(4))


def test_batch_determinism_and_permutation():
    cfg = ProtocolConfig(protocol="c", atoms_per_sample_1=5, photons_phase1=80, trajectories=6, seed=123)
    first = run_batch(cfg)
    again = run_batch(cfg)
    shuffled = run_batch(cfg, trajectory_ids=[4, 1, 5, 0, 3, 2])
    for x, y, z in zip(first.traces, again.traces, shuffled.traces):
        assert np.array_equal(x.metrics, y.metrics, equal_nan=True)
        assert np.array_equal(x.metrics, z.metrics, equal_nan=True)
        assert np.array_equal(x.detector, z.detector)
    assert np.array_equal(first.mean_metrics, again.mean_metrics)


def test_single_trajectory_batch_equals_trace():
    cfg = ProtocolConfig(protocol="b", atoms_per_sample_1=4, photons_phase1=20, photons_phase2=20, trajectories=1)
    batch = run_batch(cfg)
    assert np.array_equal(batch.mean_metrics, batch.traces[0].metrics)


def test_capture_statistic():
    k, frac, (lo, hi) = capture_statistic([1.0, 0.0, 0.995, 1e-5])
    assert k == 2 and frac == 0.5
    assert lo < 0.5 < hi
    k, frac, ci = capture_statistic([float("nan")] * 3)
    assert math.isnan(frac)


def test_variance_decreases_on_average():
    cfg = ProtocolConfig(protocol="a", photons_phase1=100, trajectories=10)
    batch = run_batch(cfg)
    var = batch.mean_column("variance_jz_sum")
    assert var[-1] < var[0] < 10


def test_capture_fraction_matches_initial_overlap():
    # strong coupling so that every trajectory settles within the horizon
    cfg = ProtocolConfig(protocol="c", atoms_per_sample_1=4, chi_tau=1.0, photons_phase1=600,
                         trajectories=1000, record_stride=600, seed=21)
    batch = run_batch(cfg)
    ov = np.array([t.final_metrics.overlap_psi0 for t in batch.traces])
    assert np.all((ov <= 0.01) | (ov >= 0.99))
    assert abs(batch.capture_fraction - 0.2) < 4 * math.sqrt(0.2 * 0.8 / 1000)
    lo, hi = batch.capture_ci
    assert lo <= 0.2 <= hi
