import numpy as np
import pytest

from conftest import random_twist
from softft.exceptions import DegenerateConfiguration
from softft.liegroup import Transform, exp_se3, log_se3
from softft.magnetics import PositionMap
from softft.registration import (
    arun_register,
    cross_covariance,
    deflection_twist,
    magnet_positions_in_center,
    register_sample,
)


def flux_for_pose(g, pmap, T):
    """Per-sensor flux that an exact linear map would report with the centre piece at T.

    Registration solves  p0_Mi = T p_Si + T R_Si (M b_i + o); invert for b_i.
    """
    Tinv = T.inverse()
    out = []
    for frame, p_m in zip(g.sensor_frames, g.magnet_positions):
        local = frame.rotation.T @ (Tinv.apply(p_m[None])[0] - frame.translation)
        out.append(pmap.inverse(local))
    return np.array(out)


@pytest.fixture
def pmap():
    return PositionMap([0.0025, 0.0025, -0.0036], [0.0, 0.0, 6.0])


def test_rest_flux_recovers_nominal(geometry, pmap):
    rest = flux_for_pose(geometry, pmap, Transform.identity())
    pts = magnet_positions_in_center(geometry, pmap, rest)
    assert np.allclose(pts, geometry.magnet_positions, atol=1e-12)
    assert register_sample(geometry, pmap, rest).allclose(Transform.identity(), atol=1e-12)


def test_points_follow_forward_model(geometry, pmap):
    T = exp_se3([0.2, -0.1, 0.3, 0.02, 0.01, -0.03])
    flux = flux_for_pose(geometry, pmap, T)
    pts = magnet_positions_in_center(geometry, pmap, flux)
    assert np.allclose(T.apply(pts), geometry.magnet_positions, atol=1e-9)
    assert register_sample(geometry, pmap, flux.reshape(-1)).allclose(T, atol=1e-9)


def test_one_sensor_perturbation_is_local(geometry, pmap):
    flux = flux_for_pose(geometry, pmap, Transform.identity())
    bumped = flux.copy()
    bumped[3] += [10.0, -5.0, 2.0]
    diff = np.linalg.norm(magnet_positions_in_center(geometry, pmap, bumped) - magnet_positions_in_center(geometry, pmap, flux), axis=1)
    assert np.flatnonzero(diff > 0).tolist() == [3]


def test_identity_and_known_pose():
    rng = np.random.default_rng(0)
    src = rng.uniform(-20, 20, (8, 3))
    assert arun_register(src, src).allclose(Transform.identity(), atol=1e-12)
    for _ in range(20):
        xi = random_twist(rng, max_rot=np.deg2rad(10), max_trans=3.0)
        T = exp_se3(xi)
        est = arun_register(src, T.apply(src))
        assert est.allclose(T, atol=1e-9)


def test_reflection_trap_keeps_proper_rotation():
    # coplanar points: H has a zero singular value, so V U^T may come out as a reflection
    rng = np.random.default_rng(2)
    hits = 0
    for _ in range(200):
        src = np.column_stack([rng.uniform(-10, 10, (6, 2)), np.zeros(6)])
        T = exp_se3(random_twist(rng, max_rot=np.pi * 0.9, max_trans=5))
        H = cross_covariance(src, T.apply(src))
        U, _, Vt = np.linalg.svd(H)
        hits += np.linalg.det(Vt.T @ U.T) < 0
        est = arun_register(src, T.apply(src))
        assert np.linalg.det(est.rotation) == pytest.approx(1.0, abs=1e-12)
        assert est.allclose(T, atol=1e-9)
    assert hits > 0


def test_residual_is_optimal():
    rng = np.random.default_rng(3)
    src = rng.uniform(-15, 15, (8, 3))
    tgt = exp_se3([1, 0, 2, 0.1, 0.2, 0]).apply(src) + rng.normal(0, 0.05, src.shape)
    best = arun_register(src, tgt)
    cost = np.sum((best.apply(src) - tgt) ** 2)
    for _ in range(50):
        other = best @ exp_se3(rng.normal(0, 1e-3, 6))
        assert np.sum((other.apply(src) - tgt) ** 2) >= cost - 1e-12


def test_equivariance():
    rng = np.random.default_rng(4)
    src = rng.uniform(-15, 15, (8, 3))
    tgt = exp_se3([1, 0, 2, 0.1, 0.2, 0]).apply(src) + rng.normal(0, 0.05, src.shape)
    G = exp_se3([3, -1, 2, -0.3, 0.1, 0.5])
    assert arun_register(src, G.apply(tgt)).allclose(G @ arun_register(src, tgt), atol=1e-10)


def test_degenerate_inputs():
    with pytest.raises(DegenerateConfiguration):
        arun_register(np.zeros((2, 3)), np.zeros((2, 3)))
    line = np.outer(np.arange(5.0), [1, 2, 3])
    with pytest.raises(DegenerateConfiguration):
        arun_register(line, line + 1)
    with pytest.raises(ValueError):
        arun_register(np.zeros((4, 3)), np.zeros((5, 3)))


def test_deflection_twist_examples():
    assert np.array_equal(deflection_twist(Transform.identity()), np.zeros(6))
    assert np.allclose(deflection_twist(Transform.from_translation([0.1, 0, 0])), [0.1, 0, 0, 0, 0, 0])
    xi = np.array([0.2, -0.1, 0.05, 0.01, 0.02, -0.01])
    assert np.allclose(deflection_twist(exp_se3(xi)), xi, atol=1e-14)
    assert np.array_equal(deflection_twist(exp_se3(xi)), log_se3(exp_se3(xi)))
