import json
import warnings

import numpy as np
import pytest

from softft.calibration import (
    CalibrationDataset,
    CalibrationResult,
    fit_A,
    fit_K,
    gravity_wrench,
    record_twists,
    run_calibration,
)
from softft.exceptions import CalibrationError, RankDeficient, RankDeficientWarning
from softft.liegroup import Transform, exp_se3
from softft.simulation import SyntheticWorld, WorldConfig, calibration_poses, rmse_per_axis


def quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientWarning)
        return fn(*args, **kwargs)


def test_gravity_wrench_examples():
    w = gravity_wrench(Transform.identity(), [0, 0, 0], 100.0)
    assert np.allclose(w, [0, 0, -0.981, 0, 0, 0], atol=1e-15)
    L, m = 40.0, 150.0
    w = gravity_wrench(Transform.identity(), [L, 0, 0], m)
    mg = m * 1e-3 * 9.81
    oracle = np.cross([L * 1e-3, 0, 0], [0, 0, -mg])
    assert np.allclose(w[:3], [0, 0, -mg])
    assert np.allclose(w[3:], oracle)
    assert np.isclose(abs(w[4]), mg * L * 1e-3)
    T = exp_se3([250, 0, 300, 0.4, -1.0, 0.2])
    assert np.array_equal(gravity_wrench(T, [0, 30, 40], 200.0), 4.0 * gravity_wrench(T, [0, 30, 40], 50.0))
    with pytest.raises(ValueError):
        gravity_wrench(T, [0, 0, 0], 0.0)


def test_gravity_wrench_rotated_flange():
    # tool pointing down: world -z is flange +z, lever along flange z adds no moment
    T = Transform(np.diag([1.0, -1.0, -1.0]), [250, 0, 300])
    w = gravity_wrench(T, [0, 0, 60], 100.0)
    assert np.allclose(w, [0, 0, 0.981, 0, 0, 0], atol=1e-12)


def test_fit_A_exact():
    rng = np.random.default_rng(0)
    A0 = rng.standard_normal((6, 24))
    B = rng.standard_normal((24, 60))
    A, res = fit_A(B, A0 @ B)
    assert np.linalg.norm(A - A0) / np.linalg.norm(A0) < 1e-8
    assert res < 1e-9
    A_zero, _ = fit_A(B, np.zeros((6, 60)))
    assert np.array_equal(A_zero, np.zeros((6, 24)))


def test_fit_A_duplicate_column():
    rng = np.random.default_rng(1)
    B = rng.standard_normal((24, 40))
    A0 = rng.standard_normal((6, 24))
    Bd = np.hstack([B, B[:, :1]])
    A1, r1 = fit_A(B, A0 @ B)
    A2, r2 = fit_A(Bd, A0 @ Bd)
    assert np.allclose(A1, A2, atol=1e-10)
    assert abs(r1 - r2) < 1e-9
    # with inconsistent data the duplicate is just one more equation: normal-equation oracle
    Xd = rng.standard_normal((6, 41))
    A3, _ = fit_A(Bd, Xd)
    assert np.allclose(A3, np.linalg.solve(Bd @ Bd.T, Bd @ Xd.T).T, atol=1e-10)


def test_fit_A_is_least_squares_optimal():
    rng = np.random.default_rng(2)
    B = rng.standard_normal((24, 50))
    Xi = rng.standard_normal((6, 50))
    A, res = fit_A(B, Xi)
    for _ in range(20):
        assert np.linalg.norm(Xi - (A + 1e-4 * rng.standard_normal(A.shape)) @ B) >= res


def test_fit_A_needs_enough_records_and_warns_when_ill_conditioned():
    rng = np.random.default_rng(3)
    with pytest.raises(ValueError):
        fit_A(rng.standard_normal((24, 10)), rng.standard_normal((6, 10)))
    B = rng.standard_normal((24, 6)) @ rng.standard_normal((6, 40))
    with pytest.warns(RankDeficientWarning):
        fit_A(B, rng.standard_normal((6, 40)))


def test_fit_K_exact():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((6, 24))
    B = rng.standard_normal((24, 50))
    K0 = np.diag(rng.uniform(5, 10, 6)) + 0.1 * rng.standard_normal((6, 6))
    K = fit_K(K0 @ A @ B, A, B)
    assert np.linalg.norm(K - K0) / np.linalg.norm(K0) < 1e-8
    # square case: exact interpolation
    B6 = rng.standard_normal((24, 6))
    W6 = K0 @ A @ B6
    assert np.allclose(fit_K(W6, A, B6) @ A @ B6, W6, atol=1e-10)
    with pytest.raises(RankDeficient):
        fit_K(np.zeros((6, 50)), A, np.outer(rng.standard_normal(24), np.ones(50)))


def test_linear_world_closed_loop(linear_world, linear_datasets):
    cal, val = linear_datasets
    res = quiet(run_calibration, cal, linear_world.geometry, linear_world.position_map())
    assert res.n_records == 193
    assert np.all(res.residual_rms < 1e-9)
    est = val.flux @ res.KA.T
    assert np.all(rmse_per_axis(est, val.wrenches()) < 1e-9)


def test_recovered_stiffness_scale(linear_world, linear_datasets):
    # wrench = K0 xi_true and A B reproduces the registration twist; where the
    # registration is nearly first-order the fitted K stays near K0
    cal, _ = linear_datasets
    res = quiet(run_calibration, cal, linear_world.geometry, linear_world.position_map())
    assert np.allclose(np.diag(res.K), np.diag(linear_world.stiffness), rtol=0.01)


def test_all_identical_poses_are_rank_deficient(linear_world):
    T = calibration_poses(0)[0][0]
    ds = linear_world.make_dataset([(T, 50.0, (0, 0, 60))] * 30, np.random.default_rng(0))
    with pytest.raises(RankDeficient):
        quiet(run_calibration, ds, linear_world.geometry, linear_world.position_map())


def test_too_few_records(linear_world, linear_datasets):
    cal, _ = linear_datasets
    with pytest.raises(ValueError):
        run_calibration(cal.subset(np.arange(10)), linear_world.geometry, linear_world.position_map())


def test_parallel_twists_match_serial(linear_world, linear_datasets):
    cal, _ = linear_datasets
    pmap = linear_world.position_map()
    a = record_twists(cal, linear_world.geometry, pmap)
    b = record_twists(cal, linear_world.geometry, pmap, workers=4)
    assert np.array_equal(a, b)


def test_record_failure_is_tagged(linear_world, linear_datasets):
    cal, _ = linear_datasets
    pmap = linear_world.position_map()
    g = linear_world.geometry
    # flux that puts every reconstructed magnet at the origin: no rigid fit exists
    collapsed = np.array([pmap.inverse(f.rotation.T @ (-f.translation)) for f in g.sensor_frames]).reshape(-1)
    flux = cal.flux.copy()
    flux[7] = collapsed
    bad = CalibrationDataset(cal.poses, cal.masses_g, cal.levers_mm, flux)
    with pytest.raises(CalibrationError) as info:
        record_twists(bad, g, pmap)
    assert info.value.index == 7
    assert "record 7" in str(info.value)


def test_dipole_world_with_rest_subtraction():
    world = SyntheticWorld(WorldConfig(flux_model="dipole"))
    cal = world.make_dataset(calibration_poses(1), np.random.default_rng(0))
    res = quiet(run_calibration, cal, world.geometry, world.position_map(), subtract_rest=True)
    assert res.rest_flux is not None
    assert np.all(res.residual_rms[:3] < 0.05)


def test_result_json_round_trip(linear_world, linear_datasets):
    cal, _ = linear_datasets
    res = quiet(run_calibration, cal, linear_world.geometry, linear_world.position_map())
    res.metadata = {"seed": 0}
    back = CalibrationResult.from_json(res.to_json())
    assert np.array_equal(back.A, res.A) and np.array_equal(back.K, res.K)
    assert back.sensitivity == res.sensitivity
    assert back.to_json() == res.to_json()
    data = json.loads(res.to_json())
    assert {"force_isotropy", "torque_isotropy"} <= set(data["sensitivity"])


def test_holdout_split(linear_datasets):
    cal, _ = linear_datasets
    train, held = cal.holdout_split(5)
    assert len(held) == 193 // 5 and len(train) + len(held) == 193
    assert np.array_equal(held.flux[0], cal.flux[4])
