import warnings

import numpy as np
import pytest

from softft import reference
from softft.calibration import run_calibration
from softft.estimation import (
    GAP_DETECTED,
    Estimator,
    TipRig,
    compose_tip_wrench,
    estimate_tip_wrench,
    estimate_wrench,
    format_record,
    stream,
    tip_adjoint,
)
from softft.exceptions import RankDeficientWarning
from softft.magnetics import FluxSample


@pytest.fixture
def est():
    rng = np.random.default_rng(0)
    return Estimator(rng.standard_normal((6, 24)) * 1e-3, np.diag([8, 8, 6.5, 10, 10, 10.0]))


def test_linear_map(est):
    assert np.array_equal(estimate_wrench(est, np.zeros(24)), np.zeros(6))
    b = np.random.default_rng(1).standard_normal(24)
    assert np.allclose(estimate_wrench(est, 2 * b), 2 * estimate_wrench(est, b))
    batch = np.random.default_rng(2).standard_normal((5, 24))
    assert np.allclose(estimate_wrench(est, batch), np.array([estimate_wrench(est, r) for r in batch]))


def test_ka_cached_and_frozen(est):
    assert np.allclose(est.KA, est.K @ est.A, atol=1e-12)
    with pytest.raises(ValueError):
        est.KA[0, 0] = 1.0
    with pytest.raises(ValueError):
        Estimator(np.zeros((5, 24)), np.eye(6))


def test_reference_k_golden():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((6, 24))
    b = rng.standard_normal(24)
    e = Estimator(A, reference.REFERENCE_K)
    xi = A @ b
    K = reference.REFERENCE_K
    hand = np.array([sum(K[i, j] * xi[j] for j in range(6)) for i in range(6)])
    assert np.allclose(estimate_wrench(e, b), hand, rtol=1e-12, atol=1e-12 * np.abs(hand).max())
    assert K[0, 0] == -8820.0


def test_rest_subtraction():
    A = np.eye(6, 24)
    rest = np.arange(24.0)
    e = Estimator(A, np.eye(6), rest_flux=rest)
    assert np.array_equal(estimate_wrench(e, rest), np.zeros(6))


def test_closed_loop_validation(linear_world, linear_datasets):
    cal, val = linear_datasets
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientWarning)
        res = run_calibration(cal, linear_world.geometry, linear_world.position_map())
    e = Estimator.from_calibration(res)
    assert np.allclose(estimate_wrench(e, val.flux), val.wrenches(), atol=1e-9)


def test_tip_composition_examples():
    assert np.array_equal(compose_tip_wrench(np.zeros(6), np.zeros(6), [0, 0, 10], [0, 0, 40]), np.zeros(6))
    F, L = 2.0, 50.0
    w = compose_tip_wrench([F, 0, 0, 0, 0, 0], np.zeros(6), [0, 0, L], [0, 0, 2 * L])
    assert np.allclose(w, [F, 0, 0, *np.cross([0, 0, L * 1e-3], [F, 0, 0])])
    assert np.allclose(w[3:], [0, L * 1e-3 * F, 0])


def test_tip_sum_and_stacked_forms_agree():
    rng = np.random.default_rng(4)
    e1 = Estimator(rng.standard_normal((6, 24)), np.eye(6) * 3)
    e2 = Estimator(rng.standard_normal((6, 24)), np.eye(6) * 2)
    rig = TipRig(e1, e2, [0, 0, 30], [0, 0, 80])
    M = rig.stacked_matrix()
    for _ in range(100):
        b1, b2 = rng.standard_normal(24), rng.standard_normal(24)
        assert np.allclose(estimate_tip_wrench(rig, b1, b2), M @ np.concatenate([b1, b2]), atol=1e-12)
    assert np.array_equal(tip_adjoint([0, 0, 0]), np.eye(6))
    with pytest.raises(ValueError):
        TipRig(e1, e2, [0, 0, 30], [0, 0, 30])


def test_tip_equilibrium():
    # two sensors carrying equal and opposite loads about the tip sum to zero
    w = np.array([1.0, -2.0, 0.5, 0.01, 0.0, -0.02])
    total = compose_tip_wrench(w, -w, [0, 0, 25], [0, 0, 25.0])
    assert np.allclose(total, 0.0)


def samples(n, period=10.0, start=0.0, flux=None, rng=None):
    out = []
    for k in range(n):
        b = np.ones(24) if flux is None else flux
        if rng is not None:
            b = b + rng.standard_normal(24)
        out.append(FluxSample(b, start + k * period))
    return out


def test_stream_constant_input(est):
    recs = list(stream(est, samples(10)))
    assert len(recs) == 10
    assert all(np.array_equal(r.wrench, recs[0].wrench) for r in recs)
    assert [r.timestamp_ms for r in recs] == [10.0 * k for k in range(10)]


def test_stream_window_and_trailer():
    e = Estimator(np.eye(6, 24), np.eye(6), window=4)
    recs = list(stream(e, samples(10)))
    assert len(recs) == 2
    assert recs[1].timestamp_ms == 70.0


def test_stream_averaging_reduces_noise():
    A = np.eye(6, 24)
    single = np.array([r.wrench for r in stream(Estimator(A, np.eye(6)), samples(5000, rng=np.random.default_rng(5), flux=np.zeros(24)))])
    avg = np.array([r.wrench for r in stream(Estimator(A, np.eye(6), window=100), samples(5000, rng=np.random.default_rng(6), flux=np.zeros(24)))])
    ratio = avg.std(axis=0).mean() / single.std(axis=0).mean()
    assert 0.07 < ratio < 0.13


def test_stream_gap_flag(est):
    src = samples(3) + samples(3, start=45.0)  # 20 -> 45 ms is a 25 ms gap
    recs = list(stream(est, src))
    flags = [r.flags for r in recs]
    assert flags[3] == (GAP_DETECTED,)
    assert all(f == () for i, f in enumerate(flags) if i != 3)
    line = format_record(recs[3])
    assert line.endswith(",GapDetected") and line.count(",") == 7


def test_stream_rejects_time_reversal(est):
    with pytest.raises(ValueError):
        list(stream(est, [FluxSample(np.ones(24), 10.0), FluxSample(np.ones(24), 5.0)]))
