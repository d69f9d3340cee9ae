"""SO(3)/SE(3) kinematics used by the registration and calibration code.

Conventions:
    - A ``Transform`` T_ab maps points in {b} to {a}: p_a = R_ab p_b + p_ab.
    - Twists are 6-vectors ordered [v; w] (translation in mm first, rotation
      in rad second).
    - Wrenches are 6-vectors ordered [f; m] (N, Nm).
    - Translations are in mm; moments from lever arms are converted to Nm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import AngleAtPi

SMALL_ANGLE = 1e-8
PI_TOLERANCE = 1e-9
# construction guard; exp/registration outputs are orthonormal to ~1e-15
ORTHO_TOL = 1e-9
MM_TO_M = 1e-3


def hat(v) -> np.ndarray:
    """Return the skew-symmetric matrix with hat(v) @ u == cross(v, u)."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


@dataclass(frozen=True, eq=False)
class Transform:
    """Rigid pose (rotation, translation in mm) of one frame in another."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        p = np.array(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(p))):
            raise ValueError("transform entries must be finite")
        if np.linalg.norm(R.T @ R - np.eye(3)) > ORTHO_TOL or np.linalg.det(R) < 0.0:
            raise ValueError("rotation must be orthonormal with det +1")
        R.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    @classmethod
    def identity(cls) -> Transform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_translation(cls, p) -> Transform:
        return cls(np.eye(3), p)

    @classmethod
    def from_rotation(cls, R) -> Transform:
        return cls(R, np.zeros(3))

    @classmethod
    def from_matrix(cls, T) -> Transform:
        T = np.asarray(T, dtype=float)
        if T.shape == (3, 4):
            return cls(T[:, :3], T[:, 3])
        if T.shape != (4, 4):
            raise ValueError(f"expected a 4x4 or 3x4 matrix, got {T.shape}")
        return cls(T[:3, :3], T[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> Transform:
        Rt = self.rotation.T
        return Transform(Rt, -Rt @ self.translation)

    def __matmul__(self, other: Transform) -> Transform:
        if not isinstance(other, Transform):
            return NotImplemented
        return Transform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points) -> np.ndarray:
        """Map points (3,) or (n, 3) from the child frame into the parent."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def allclose(self, other: Transform, atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0.0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0.0, atol=atol)
        )

    def __repr__(self) -> str:
        return f"Transform(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def rotation_angle(R) -> float:
    R = np.asarray(R, dtype=float)
    s = 0.5 * np.linalg.norm(vee(R - R.T))
    c = 0.5 * (np.trace(R) - 1.0)
    return float(np.arctan2(s, c))


def exp_so3(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    W = hat(w)
    if theta < SMALL_ANGLE:
        a = 1.0 - theta**2 / 6.0
        b = 0.5 - theta**2 / 24.0
    else:
        a = np.sin(theta) / theta
        half = np.sin(0.5 * theta) / (0.5 * theta)
        b = 0.5 * half * half
    return np.eye(3) + a * W + b * (W @ W)


def log_so3(R) -> np.ndarray:
    """Rotation vector of R; raises AngleAtPi near the cut locus."""
    R = np.asarray(R, dtype=float)
    theta = rotation_angle(R)
    if np.pi - theta < PI_TOLERANCE:
        raise AngleAtPi(f"rotation angle {theta!r} is within {PI_TOLERANCE} of pi")
    skew = vee(R - R.T)
    if theta < SMALL_ANGLE:
        return 0.5 * (1.0 + theta**2 / 6.0) * skew
    if theta < 3.0:
        return theta / (2.0 * np.sin(theta)) * skew
    # near pi the antisymmetric part vanishes; recover the axis from the symmetric part
    B = 0.5 * (R + R.T) - np.cos(theta) * np.eye(3)
    k = int(np.argmax(np.diag(B)))
    axis = B[:, k] / np.linalg.norm(B[:, k])
    if axis @ skew < 0.0:
        axis = -axis
    return theta * axis


def _left_jacobian_coeffs(theta: float) -> tuple[float, float]:
    if theta < SMALL_ANGLE:
        return 0.5 - theta**2 / 24.0, 1.0 / 6.0 - theta**2 / 120.0
    half = np.sin(0.5 * theta) / (0.5 * theta)
    return 0.5 * half * half, (theta - np.sin(theta)) / theta**3


def exp_se3(xi) -> Transform:
    """Exponential of the twist [v; w]."""
    xi = np.asarray(xi, dtype=float)
    v, w = xi[:3], xi[3:]
    theta = np.linalg.norm(w)
    W = hat(w)
    b, c = _left_jacobian_coeffs(theta)
    V = np.eye(3) + b * W + c * (W @ W)
    return Transform(exp_so3(w), V @ v)


def log_se3(T: Transform) -> np.ndarray:
    """Twist [v; w] with exp_se3(log_se3(T)) == T."""
    w = log_so3(T.rotation)
    theta = np.linalg.norm(w)
    W = hat(w)
    if theta < SMALL_ANGLE:
        d = 1.0 / 12.0 + theta**2 / 720.0
    else:
        half = 0.5 * theta
        d = (1.0 - half / np.tan(half)) / theta**2
    V_inv = np.eye(3) - 0.5 * W + d * (W @ W)
    return np.concatenate([V_inv @ T.translation, w])


def adjoint(T: Transform) -> np.ndarray:
    """6x6 adjoint [[R, p^ R], [0, R]] with the translation converted to m.

    The mm-to-m scaling keeps moments in Nm when the result is applied to
    wrenches; use it only for wrench transport.
    """
    R = T.rotation
    Ad = np.zeros((6, 6))
    Ad[:3, :3] = R
    Ad[:3, 3:] = hat(T.translation * MM_TO_M) @ R
    Ad[3:, 3:] = R
    return Ad


def transform_wrench(T_ab: Transform, w) -> np.ndarray:
    """Carry a wrench expressed at {a} to {b}: w_b = Ad(T_ab)^T w_a."""
    return adjoint(T_ab).T @ np.asarray(w, dtype=float)
