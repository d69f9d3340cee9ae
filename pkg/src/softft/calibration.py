"""Fit the flux-to-twist matrix A and the stiffness K from calibration poses.

Pipeline per record: flux stack -> magnet points in {C} -> rigid pose of
{C} -> deflection twist. Stacking records column-wise gives B (24 x n),
Xi (6 x n) and the gravity wrenches W (6 x n); then A = Xi B^+ and
K = W (A B)^+.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import CalibrationError, RankDeficient, RankDeficientWarning, SoftFTError
from .geometry import SensorGeometry
from .liegroup import Transform, transform_wrench
from .magnetics import PositionMap
from .registration import deflection_twist, register_sample
from .sensitivity import SensitivityReport, sensitivity_report

GRAVITY = 9.81  # m/s^2
PINV_RCOND = 1e-10
COND_WARN = 1e8


@dataclass(eq=False)
class CalibrationDataset:
    """Calibration records: flange pose, hung mass, lever arm and mean flux."""

    poses: list  # Transform, flange {ee} in world
    masses_g: np.ndarray  # (n,)
    levers_mm: np.ndarray  # (n, 3) centre of mass in {ee}
    flux: np.ndarray  # (n, 3 * sensors), uT
    rest_flux: np.ndarray | None = None

    def __post_init__(self):
        self.poses = list(self.poses)
        n = len(self.poses)
        self.masses_g = np.asarray(self.masses_g, dtype=float).reshape(n)
        self.levers_mm = np.asarray(self.levers_mm, dtype=float).reshape(n, 3)
        flux = np.asarray(self.flux, dtype=float)
        self.flux = flux.reshape(n, -1) if n else flux.reshape(0, flux.shape[-1] if flux.ndim == 2 else 24)
        if self.rest_flux is not None:
            self.rest_flux = np.asarray(self.rest_flux, dtype=float).reshape(-1)
        if np.any(self.masses_g <= 0.0):
            raise ValueError("masses must be positive")
        if not np.all(np.isfinite(self.flux)):
            raise ValueError("flux stacks must be finite")

    def __len__(self) -> int:
        return len(self.poses)

    def subset(self, index) -> CalibrationDataset:
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return CalibrationDataset(
            [self.poses[i] for i in index],
            self.masses_g[index],
            self.levers_mm[index],
            self.flux[index],
            self.rest_flux,
        )

    def wrenches(self, T_ee_c: Transform | None = None) -> np.ndarray:
        """Ground-truth wrenches on the centre piece, shape (n, 6)."""
        return np.array(
            [gravity_wrench(T, lever, m, T_ee_c) for T, lever, m in zip(self.poses, self.levers_mm, self.masses_g)]
        ).reshape(len(self), 6)

    def holdout_split(self, every: int = 5) -> tuple[CalibrationDataset, CalibrationDataset]:
        """(train, held-out) with every ``every``-th record held out."""
        held = np.zeros(len(self), dtype=bool)
        held[every - 1 :: every] = True
        return self.subset(~held), self.subset(held)


def gravity_wrench(T_0_ee: Transform, lever_mm, mass_g: float, T_ee_c: Transform | None = None) -> np.ndarray:
    """Wrench of a hung mass, felt at the sensor centre frame {C}.

    The mass hangs at ``lever_mm`` in the flange frame; its frame {w} is
    world-aligned so it carries [0, 0, -mg, 0, 0, 0]. The wrench is carried
    to {C} (the flange frame unless ``T_ee_c`` is given) with Ad^T.
    """
    if not mass_g > 0.0:
        raise ValueError(f"mass must be positive, got {mass_g}")
    T_0_c = T_0_ee if T_ee_c is None else T_0_ee @ T_ee_c
    p_w = T_0_ee.apply(np.asarray(lever_mm, dtype=float))
    T_w_c = Transform(T_0_c.rotation, T_0_c.translation - p_w)
    w_w = np.array([0.0, 0.0, -mass_g * 1e-3 * GRAVITY, 0.0, 0.0, 0.0])
    return transform_wrench(T_w_c, w_w)


def pinv(X) -> np.ndarray:
    """Moore-Penrose pseudoinverse, truncating singular values below 1e-10 sigma_max."""
    return np.linalg.pinv(np.asarray(X, dtype=float), rcond=PINV_RCOND)


def condition_number(X) -> float:
    s = np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)
    if s.size == 0 or s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def numerical_rank(X) -> int:
    s = np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > PINV_RCOND * s[0]))


def fit_A(B, Xi) -> tuple[np.ndarray, float]:
    """A = Xi B^+ and the Frobenius residual |Xi - A B|.

    Warns with RankDeficientWarning when cond(B) exceeds 1e8.
    """
    B = np.asarray(B, dtype=float)
    Xi = np.asarray(Xi, dtype=float)
    if B.shape[1] != Xi.shape[1]:
        raise ValueError(f"B has {B.shape[1]} columns but Xi has {Xi.shape[1]}")
    if B.shape[1] < B.shape[0]:
        raise ValueError(f"need at least {B.shape[0]} records to fit A, got {B.shape[1]}")
    cond = condition_number(B)
    if cond > COND_WARN:
        warnings.warn(f"flux matrix is ill-conditioned (cond = {cond:.3g}); using truncated pseudoinverse",
                      RankDeficientWarning, stacklevel=2)
    A = Xi @ pinv(B)
    return A, float(np.linalg.norm(Xi - A @ B))


def fit_K(W, A, B) -> np.ndarray:
    """K = W (A B)^+; raises RankDeficient unless A B has rank 6."""
    AB = np.asarray(A, dtype=float) @ np.asarray(B, dtype=float)
    rank = numerical_rank(AB)
    if rank < 6:
        raise RankDeficient(f"A B has rank {rank} < 6; stiffness is not identifiable")
    return np.asarray(W, dtype=float) @ pinv(AB)


@dataclass(eq=False)
class CalibrationResult:
    A: np.ndarray
    K: np.ndarray
    residual_rms: np.ndarray  # per wrench axis on the training set
    twist_residual_rms: np.ndarray
    cond_B: float
    cond_AB: float
    sensitivity: SensitivityReport
    n_records: int
    rest_flux: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def KA(self) -> np.ndarray:
        return self.K @ self.A

    def to_dict(self) -> dict:
        def finite(x):
            return None if not np.isfinite(x) else float(x)

        return {
            "A": self.A.tolist(),
            "K": self.K.tolist(),
            "shape": {"A": list(self.A.shape), "K": list(self.K.shape)},
            "diagnostics": {
                "n_records": self.n_records,
                "residual_rms": self.residual_rms.tolist(),
                "twist_residual_rms": self.twist_residual_rms.tolist(),
                "cond_B": finite(self.cond_B),
                "cond_AB": finite(self.cond_AB),
            },
            "sensitivity": self.sensitivity.to_dict(),
            "rest_flux": None if self.rest_flux is None else self.rest_flux.tolist(),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> CalibrationResult:
        diag = data["diagnostics"]

        def num(x):
            return float("inf") if x is None else float(x)

        rest = data.get("rest_flux")
        return cls(
            A=np.array(data["A"], dtype=float),
            K=np.array(data["K"], dtype=float),
            residual_rms=np.array(diag["residual_rms"], dtype=float),
            twist_residual_rms=np.array(diag["twist_residual_rms"], dtype=float),
            cond_B=num(diag["cond_B"]),
            cond_AB=num(diag["cond_AB"]),
            sensitivity=SensitivityReport.from_dict(data["sensitivity"]),
            n_records=int(diag["n_records"]),
            rest_flux=None if rest is None else np.array(rest, dtype=float),
            metadata=data.get("metadata", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> CalibrationResult:
        return cls.from_dict(json.loads(text))


def record_twists(dataset: CalibrationDataset, g: SensorGeometry, pmap: PositionMap, workers: int | None = None) -> np.ndarray:
    """Deflection twist of every record, shape (n, 6), in record order."""

    def one(i):
        try:
            return deflection_twist(register_sample(g, pmap, dataset.flux[i]))
        except SoftFTError as exc:
            raise CalibrationError(i, exc) from exc

    indices = range(len(dataset))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, indices))
    else:
        rows = [one(i) for i in indices]
    return np.array(rows).reshape(len(dataset), 6)


def run_calibration(
    dataset: CalibrationDataset,
    g: SensorGeometry,
    pmap: PositionMap,
    *,
    subtract_rest: bool = False,
    workers: int | None = None,
    T_ee_c: Transform | None = None,
) -> CalibrationResult:
    """Calibrate A and K from ``dataset``.

    Registration runs on the raw flux. With ``subtract_rest`` the dataset's
    rest flux is removed from B before fitting (estimation must then also
    subtract it; it is kept in the result).
    """
    if len(dataset) < 3 * g.count:
        raise ValueError(f"need at least {3 * g.count} records, got {len(dataset)}")
    Xi = record_twists(dataset, g, pmap, workers).T
    W = dataset.wrenches(T_ee_c).T
    B = dataset.flux.T
    rest = None
    if subtract_rest:
        if dataset.rest_flux is None:
            raise ValueError("subtract_rest requested but the dataset has no rest flux")
        rest = dataset.rest_flux
        B = B - rest[:, None]
    A, _ = fit_A(B, Xi)
    K = fit_K(W, A, B)
    AB = A @ B
    return CalibrationResult(
        A=A,
        K=K,
        residual_rms=np.sqrt(np.mean((K @ AB - W) ** 2, axis=1)),
        twist_residual_rms=np.sqrt(np.mean((AB - Xi) ** 2, axis=1)),
        cond_B=condition_number(B),
        cond_AB=condition_number(AB),
        sensitivity=sensitivity_report(K @ A),
        n_records=len(dataset),
        rest_flux=rest,
    )
