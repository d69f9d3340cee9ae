"""Synthetic sensor world and the pose sets used to calibrate and validate it.

The world applies Hooke's law with a known stiffness (twist = K0^-1 w) and
then produces flux in one of two ways:

``linear``
    flux deviation is exactly linear in the centre-piece twist,
    b-hat = G twist, where G is the first-order magnet displacement seen by
    each sensor pushed through the inverse of a per-axis position map whose
    offset is the rest position. Rest flux is zero.
``dipole``
    the centre piece is moved by exp(twist) and every sensor reads its own
    magnet through the point-dipole model. Rest flux is non-zero.

Measurements average ``window`` noisy, optionally quantized samples.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .calibration import CalibrationDataset, gravity_wrench
from .geometry import GeometryConfig, SensorGeometry, build_geometry
from .liegroup import Transform, exp_se3, exp_so3, hat
from .magnetics import (
    MAGNET_MOMENT,
    ChipModel,
    DipoleSource,
    PositionMap,
    corrupt,
    default_sources,
    dipole_gradient,
    dipole_sweep,
    fit_position_map,
    flux_at_pose,
)

# N/mm for translation, Nm/rad for rotation
DEFAULT_STIFFNESS = (8.0, 8.0, 6.5, 10.0, 10.0, 10.0)
FLANGE_POSITION_MM = (250.0, 0.0, 300.0)
# centre of mass of the three calibration attachments, in the flange frame
LEVERS_MM = ((0.0, 0.0, 60.0), (30.0, 0.0, 60.0), (0.0, 30.0, 40.0))
CALIBRATION_MASSES_G = (50.0, 200.0)
VALIDATION_MASS_G = 100.0
CALIBRATION_POSE_COUNT = 193


@dataclass(frozen=True)
class WorldConfig:
    flux_model: str = "linear"
    stiffness_diag: tuple = DEFAULT_STIFFNESS
    noise_ut: float = 0.0
    quantize: bool = False
    window: int = 100
    moment: float = MAGNET_MOMENT
    geometry: GeometryConfig = field(default_factory=GeometryConfig)

    def __post_init__(self):
        if self.flux_model not in ("linear", "dipole"):
            raise ValueError(f"flux_model must be 'linear' or 'dipole', got {self.flux_model!r}")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.noise_ut < 0:
            raise ValueError("noise must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stiffness_diag"] = list(self.stiffness_diag)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> WorldConfig:
        data = dict(data)
        data["geometry"] = GeometryConfig(**data.get("geometry", {}))
        data["stiffness_diag"] = tuple(data.get("stiffness_diag", DEFAULT_STIFFNESS))
        return cls(**data)


def dipole_slopes(offset_mm: float, moment: float = MAGNET_MOMENT) -> np.ndarray:
    """Flux change per mm of magnet travel (x, y, z) at ``offset_mm`` above a sensor."""
    src = DipoleSource(moment, Transform.from_translation([0.0, 0.0, offset_mm]))
    # moving the magnet is the negative of moving the field point
    return -np.diag(dipole_gradient(src, np.zeros(3)))


def linear_position_map(offset_mm: float, moment: float = MAGNET_MOMENT) -> PositionMap:
    """Exact map of the linear world: local dipole slopes, rest position as offset."""
    return PositionMap(1.0 / dipole_slopes(offset_mm, moment), [0.0, 0.0, offset_mm])


def linear_flux_matrix(g: SensorGeometry, pmap: PositionMap) -> np.ndarray:
    """G (3n x 6): first-order flux change per unit centre-piece twist [v; w]."""
    rows = []
    for frame, p_m in zip(g.sensor_frames, g.magnet_positions):
        # magnet in the moved sensor frame: R_s^T (p_m - v + p_m^ w - p_s) to first order
        J = frame.rotation.T @ np.hstack([-np.eye(3), hat(p_m)])
        rows.append(J / pmap.slopes[:, None])
    return np.vstack(rows)


class SyntheticWorld:
    def __init__(self, cfg: WorldConfig = WorldConfig()):
        self.cfg = cfg
        self.geometry = build_geometry(cfg.geometry)
        self.stiffness = np.diag(np.asarray(cfg.stiffness_diag, dtype=float))
        self.chip = ChipModel() if cfg.quantize else None
        offset = cfg.geometry.magnet_offset_mm
        if cfg.flux_model == "linear":
            self.true_map = linear_position_map(offset, cfg.moment)
            self.G = linear_flux_matrix(self.geometry, self.true_map)
            self.rest_flux = np.zeros(3 * self.geometry.count)
        else:
            self.sources = default_sources(self.geometry, cfg.moment)
            self.true_map = None
            self.rest_flux = self.clean_flux(np.zeros(6))

    def position_map(self) -> PositionMap:
        """Map handed to the calibration pipeline.

        Exact for the linear world; for the dipole world it is fitted on a
        noise-free dipole sweep around the rest gap.
        """
        if self.true_map is not None:
            return self.true_map
        offset = self.cfg.geometry.magnet_offset_mm
        return fit_position_map(dipole_sweep(offset, self.cfg.moment), (0.0, 0.0, offset)).map

    def twist_for(self, wrench) -> np.ndarray:
        return np.linalg.solve(self.stiffness, np.asarray(wrench, dtype=float))

    def clean_flux(self, twist) -> np.ndarray:
        if self.cfg.flux_model == "linear":
            return self.G @ np.asarray(twist, dtype=float)
        return flux_at_pose(self.geometry, exp_se3(twist), self.sources).reshape(-1)

    def measure(self, twist, rng: np.random.Generator, window: int | None = None) -> np.ndarray:
        """Mean of ``window`` noisy (and possibly quantized) flux stacks."""
        window = self.cfg.window if window is None else window
        clean = self.clean_flux(twist)
        if self.cfg.noise_ut == 0.0 and self.chip is None:
            return clean
        samples = corrupt(np.tile(clean, (window, 1)), self.chip, self.cfg.noise_ut, rng)
        return samples.mean(axis=0)

    def make_dataset(self, poses, rng: np.random.Generator) -> CalibrationDataset:
        """Simulate a dataset for (flange pose, mass_g, lever_mm) records."""
        poses = list(poses)
        flux = np.empty((len(poses), 3 * self.geometry.count))
        for i, (T, mass, lever) in enumerate(poses):
            flux[i] = self.measure(self.twist_for(gravity_wrench(T, lever, mass)), rng)
        return CalibrationDataset(
            [p[0] for p in poses],
            [p[1] for p in poses],
            [p[2] for p in poses],
            flux,
            self.rest_flux.copy(),
        )


def _rot_y(a: float) -> np.ndarray:
    return exp_so3([0.0, a, 0.0])


def _rot_z(a: float) -> np.ndarray:
    return exp_so3([0.0, 0.0, a])


def _flange(R) -> Transform:
    return Transform(R, FLANGE_POSITION_MM)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def calibration_poses(seed: int, count: int = CALIBRATION_POSE_COUNT) -> list:
    """Deterministic calibration set of ``count`` (pose, mass_g, lever_mm) records.

    Grid: tool axis on two cones (60 and 120 deg from vertical) at 16
    azimuths, plus 8 rolls about a horizontal tool axis; each orientation
    with both masses. Attachments cycle through LEVERS_MM. The remainder is
    uniformly random orientations with a random mass.
    """
    orientations = []
    for cone in (60.0, 120.0):
        for k in range(16):
            orientations.append(_rot_z(np.deg2rad(22.5 * k)) @ _rot_y(np.deg2rad(cone)))
    for k in range(8):
        orientations.append(_rot_y(np.pi / 2) @ _rot_z(np.deg2rad(45.0 * k)))
    records = []
    for R in orientations:
        for mass in CALIBRATION_MASSES_G:
            records.append((_flange(R), mass, LEVERS_MM[len(records) % len(LEVERS_MM)]))
    rng = np.random.default_rng([seed, 7])
    while len(records) < count:
        mass = CALIBRATION_MASSES_G[int(rng.integers(len(CALIBRATION_MASSES_G)))]
        records.append((_flange(random_rotation(rng)), mass, LEVERS_MM[len(records) % len(LEVERS_MM)]))
    return [tuple(r) for r in records[:count]]


def validation_poses(seed: int) -> list:
    """100 g validation set: 3 cones x 8 azimuths plus 24 random orientations."""
    records = []
    for cone in (45.0, 90.0, 135.0):
        for k in range(8):
            R = _rot_z(np.deg2rad(45.0 * k + 10.0)) @ _rot_y(np.deg2rad(cone))
            records.append((_flange(R), VALIDATION_MASS_G, LEVERS_MM[len(records) % len(LEVERS_MM)]))
    rng = np.random.default_rng([seed, 11])
    for _ in range(24):
        records.append((_flange(random_rotation(rng)), VALIDATION_MASS_G, LEVERS_MM[len(records) % len(LEVERS_MM)]))
    return records


def rmse_per_axis(estimated, truth) -> np.ndarray:
    """RMSE per wrench axis; returns N for forces and Nm for moments."""
    d = np.asarray(estimated, dtype=float) - np.asarray(truth, dtype=float)
    return np.sqrt(np.mean(d**2, axis=0))
