"""Centre-piece pose from per-sensor magnet positions."""

from __future__ import annotations

import numpy as np

from .exceptions import DegenerateConfiguration
from .geometry import SensorGeometry
from .liegroup import Transform, log_se3
from .magnetics import FluxSample, PositionMap, position_from_flux

RANK_TOL = 1e-9


def magnet_positions_in_center(g: SensorGeometry, pmap: PositionMap, sample) -> np.ndarray:
    """Magnet positions in {C}: p_Si + R_Si (M b_i + o), one row per sensor.

    ``sample`` may be a FluxSample, an (n, 3) array or a stacked 3n vector.
    """
    flux = sample.flux if isinstance(sample, FluxSample) else np.asarray(sample, dtype=float).reshape(-1, 3)
    if flux.shape[0] != g.count:
        raise ValueError(f"expected flux for {g.count} sensors, got {flux.shape[0]}")
    local = position_from_flux(flux, pmap)
    return g.sensor_positions + np.einsum("nij,nj->ni", g.sensor_rotations, local)


def cross_covariance(source, target) -> np.ndarray:
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    return (source - source.mean(axis=0)).T @ (target - target.mean(axis=0))


def arun_register(source, target) -> Transform:
    """Least-squares rigid fit target ~ R source + p via the SVD of H.

    ``source`` holds the points expressed in {C}, ``target`` the same points
    in {0}; the result is the pose of {C} in {0}. A reflection solution is
    corrected by flipping the last column of V.
    """
    source = np.asarray(source, dtype=float)
    target = np.asarray(target, dtype=float)
    if source.shape != target.shape or source.ndim != 2 or source.shape[1] != 3:
        raise ValueError(f"point sets must both be (n, 3); got {source.shape} and {target.shape}")
    if source.shape[0] < 3:
        raise DegenerateConfiguration(f"need at least 3 correspondences, got {source.shape[0]}")
    src_c = source.mean(axis=0)
    tgt_c = target.mean(axis=0)
    S, D = source - src_c, target - tgt_c
    H = S.T @ D
    U, s, Vt = np.linalg.svd(H)
    # a rigid motion preserves spread, so a set collapsed relative to the other is degenerate
    spread = min(np.linalg.norm(S), np.linalg.norm(D))
    if spread <= RANK_TOL * max(np.linalg.norm(S), np.linalg.norm(D)) or s[1] <= RANK_TOL * s[0]:
        raise DegenerateConfiguration(f"cross-covariance rank < 2 (singular values {s.tolist()})")
    V = Vt.T
    R = V @ U.T
    if np.linalg.det(R) < 0.0:
        V[:, 2] = -V[:, 2]
        R = V @ U.T
    p = tgt_c - R @ src_c
    return Transform(R, p)


def deflection_twist(T: Transform) -> np.ndarray:
    """Deflection twist [v; w] of the centre piece (matrix log of its pose)."""
    return log_se3(T)


def register_sample(g: SensorGeometry, pmap: PositionMap, sample) -> Transform:
    source = magnet_positions_in_center(g, pmap, sample)
    return arun_register(source, g.magnet_positions)
