"""Error propagation from flux noise to wrench estimates.

For w = KA b-hat, a flux error db gives |dw| <= sigma_max(KA) |db|. The
force and torque rows of KA are analysed separately; their singular value
ratios are the isotropy indices.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class SensitivityReport:
    force_sigma_max: float  # N/uT
    force_sigma_min: float
    force_isotropy: float
    torque_sigma_max: float  # Nm/uT
    torque_sigma_min: float
    torque_isotropy: float
    sigma_max: float
    tip_sigma_max: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> SensitivityReport:
        return cls(**data)


def _isotropy(s: np.ndarray) -> float:
    # a zero block has no preferred direction but also no sensitivity; report 0
    return float(s[-1] / s[0]) if s[0] > 0.0 else 0.0


def wrench_error_bound(KA, delta_b_norm: float) -> float:
    if delta_b_norm < 0:
        raise ValueError(f"delta_b_norm must be non-negative, got {delta_b_norm}")
    return float(np.linalg.norm(np.asarray(KA, dtype=float), 2) * delta_b_norm)


def sensitivity_report(KA, tip_matrix=None) -> SensitivityReport:
    """Singular values of the force rows (0-2) and torque rows (3-5) of KA.

    ``tip_matrix`` is the stacked [Ad1 K1 A1 | Ad2 K2 A2] of a two-sensor
    tool, if one is being analysed.
    """
    KA = np.asarray(KA, dtype=float)
    if KA.shape[0] != 6:
        raise ValueError(f"KA must have 6 rows, got {KA.shape}")
    if not np.all(np.isfinite(KA)):
        raise ValueError("KA has non-finite entries")
    sf = np.linalg.svd(KA[:3], compute_uv=False)
    st = np.linalg.svd(KA[3:], compute_uv=False)
    tip = None
    if tip_matrix is not None:
        tip = float(np.linalg.norm(np.asarray(tip_matrix, dtype=float), 2))
    return SensitivityReport(
        force_sigma_max=float(sf[0]),
        force_sigma_min=float(sf[-1]),
        force_isotropy=_isotropy(sf),
        torque_sigma_max=float(st[0]),
        torque_sigma_min=float(st[-1]),
        torque_isotropy=_isotropy(st),
        sigma_max=float(np.linalg.norm(KA, 2)),
        tip_sigma_max=tip,
    )


def range_estimate(K, max_deflection) -> np.ndarray:
    """Per-axis full-scale estimate |K_ii| * max_deflection_i.

    Deflections must be in the twist units K was fitted with.
    """
    K = np.asarray(K, dtype=float)
    d = np.asarray(max_deflection, dtype=float)
    if np.any(d < 0.0):
        raise ValueError("max_deflection must be non-negative")
    return np.abs(np.diag(K)) * d


def empirical_gains(KA, n: int, rng: np.random.Generator, power_steps: int = 0) -> np.ndarray:
    """|KA u| for ``n`` random unit vectors u.

    With ``power_steps > 0`` each direction is first pushed toward the top
    right-singular vector by that many power-iteration steps on KA^T KA.
    """
    KA = np.asarray(KA, dtype=float)
    U = rng.standard_normal((n, KA.shape[1]))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    G = KA.T @ KA
    for _ in range(power_steps):
        U = U @ G
        U /= np.linalg.norm(U, axis=1, keepdims=True)
    return np.linalg.norm(U @ KA.T, axis=1)


def synthetic_ka(
    force_sigmas,
    torque_sigmas,
    columns: int = 24,
    seed: int = 0,
) -> np.ndarray:
    """Build a 6 x ``columns`` KA with prescribed force/torque block singular values."""
    rng = np.random.default_rng(seed)
    blocks = []
    for sig in (force_sigmas, torque_sigmas):
        sig = np.asarray(sig, dtype=float)
        U, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        V, _ = np.linalg.qr(rng.standard_normal((columns, 3)))
        blocks.append(U @ np.diag(sig) @ V.T)
    return np.vstack(blocks)
