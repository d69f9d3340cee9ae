"""Magnetic flux models: point-dipole oracle, linear flux-to-position map,
chip quantization and synthetic sample generation.

Units: positions in mm, flux density in microtesla, dipole moments in A*m^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import DegenerateSweep, InvalidConfig, SingularField
from .geometry import SensorGeometry
from .liegroup import Transform

MU0_OVER_4PI = 1e-7  # T*m/A
TESLA_TO_UT = 1e6
MIN_DISTANCE_MM = 0.1
AXES = ("x", "y", "z")

# K&J D101-N52: 1/16" diameter, 1/32" thick, N52 remanence ~1.45 T.
MAGNET_DIAMETER_MM = 25.4 / 16
MAGNET_HEIGHT_MM = 25.4 / 32
N52_REMANENCE_T = 1.45
MAGNET_VOLUME_M3 = np.pi * (0.5 * MAGNET_DIAMETER_MM * 1e-3) ** 2 * (MAGNET_HEIGHT_MM * 1e-3)
MAGNET_MOMENT = N52_REMANENCE_T * MAGNET_VOLUME_M3 / (4e-7 * np.pi)  # ~1.8e-3 A*m^2


@dataclass(frozen=True, eq=False)
class PositionMap:
    """Per-axis linear map p = M b + o (M diagonal, mm/uT; o in mm)."""

    slopes: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        slopes = np.array(self.slopes, dtype=float).reshape(3)
        offset = np.array(self.offset, dtype=float).reshape(3)
        if np.any(slopes == 0.0):
            raise InvalidConfig("position map slopes must be nonzero")
        slopes.setflags(write=False)
        offset.setflags(write=False)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "offset", offset)

    @property
    def M(self) -> np.ndarray:
        return np.diag(self.slopes)

    @classmethod
    def identity(cls) -> PositionMap:
        return cls(np.ones(3), np.zeros(3))

    def inverse(self, p) -> np.ndarray:
        """Flux that maps to position ``p``."""
        return (np.asarray(p, dtype=float) - self.offset) / self.slopes

    def to_dict(self) -> dict:
        return {"M_diag": self.slopes.tolist(), "o": self.offset.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> PositionMap:
        return cls(data["M_diag"], data["o"])


@dataclass(frozen=True, eq=False)
class DipoleSource:
    """Point dipole whose moment points along the +z axis of ``pose``."""

    moment: float
    pose: Transform

    def __post_init__(self):
        if not self.moment > 0.0:
            raise InvalidConfig(f"dipole moment must be positive, got {self.moment}")

    @property
    def moment_vector(self) -> np.ndarray:
        return self.moment * self.pose.rotation[:, 2]


@dataclass(frozen=True)
class ChipModel:
    """MLX90393 digital output model at the finest usable gain."""

    resolution: tuple = (6.009, 6.009, 9.680)  # uT/LSB
    sample_period_ms: float = 10.0
    # 839 us preparation + 3 axes * 835 us conversion
    min_period_ms: float = 3.34

    def __post_init__(self):
        if len(self.resolution) != 3 or any(r <= 0 for r in self.resolution):
            raise InvalidConfig(f"resolutions must be three positive values, got {self.resolution}")
        if self.sample_period_ms < self.min_period_ms:
            raise InvalidConfig(
                f"sample period {self.sample_period_ms} ms is below the {self.min_period_ms} ms minimum"
            )


@dataclass(frozen=True, eq=False)
class FluxSample:
    """One synchronized reading: (n_sensors, 3) flux in uT plus a timestamp."""

    flux: np.ndarray
    timestamp_ms: float = 0.0

    def __post_init__(self):
        flux = np.array(self.flux, dtype=float)
        if flux.ndim == 1:
            flux = flux.reshape(-1, 3)
        if flux.ndim != 2 or flux.shape[1] != 3:
            raise ValueError(f"flux must have shape (n, 3), got {flux.shape}")
        flux.setflags(write=False)
        object.__setattr__(self, "flux", flux)

    @property
    def count(self) -> int:
        return self.flux.shape[0]

    def stacked(self) -> np.ndarray:
        """b-hat: sensors 0..n-1, axes x, y, z within each."""
        return self.flux.reshape(-1).copy()


class SweepPoint(NamedTuple):
    axis: str
    commanded_mm: float
    flux: np.ndarray


@dataclass
class PositionMapFit:
    map: PositionMap
    r_squared: np.ndarray
    counts: dict = field(default_factory=dict)


def _dipole_field_world(moment_vec, source_pos_mm, points_mm) -> np.ndarray:
    r = (np.asarray(points_mm, dtype=float) - source_pos_mm) * 1e-3
    dist = np.linalg.norm(r, axis=-1, keepdims=True)
    if np.any(dist * 1e3 <= MIN_DISTANCE_MM):
        raise SingularField(f"field point within {MIN_DISTANCE_MM} mm of the dipole")
    rhat = r / dist
    mdotr = np.sum(rhat * moment_vec, axis=-1, keepdims=True)
    B = MU0_OVER_4PI * (3.0 * rhat * mdotr - moment_vec) / dist**3
    return B * TESLA_TO_UT


def dipole_flux(src: DipoleSource, sensor_frame: Transform) -> np.ndarray:
    """Flux (uT) of ``src`` at the origin of ``sensor_frame``, in sensor axes.

    Both poses must be expressed in the same parent frame.
    """
    B_world = _dipole_field_world(src.moment_vector, src.pose.translation, sensor_frame.translation)
    return sensor_frame.rotation.T @ B_world


def dipole_gradient(src: DipoleSource, point_mm) -> np.ndarray:
    """Jacobian dB/dx (uT/mm) of the world-frame field at ``point_mm``."""
    m = src.moment_vector
    r = (np.asarray(point_mm, dtype=float) - src.pose.translation) * 1e-3
    d = np.linalg.norm(r)
    mr = m @ r
    J = (
        np.outer(r, m) + mr * np.eye(3) + np.outer(m, r)
    ) / d**5 - 5.0 * mr * np.outer(r, r) / d**7
    return 3.0 * MU0_OVER_4PI * J * TESLA_TO_UT * 1e-3


def position_from_flux(b, pmap: PositionMap) -> np.ndarray:
    """p = M b + o, for a single (3,) flux or a stack (..., 3)."""
    return np.asarray(b, dtype=float) * pmap.slopes + pmap.offset


def fit_position_map(sweep: Sequence[SweepPoint], stage_origin_mm=(0.0, 0.0, 0.0)) -> PositionMapFit:
    """Regress position on flux independently per axis.

    Each sweep point moves the magnet along one axis; that axis' position
    (commanded value plus ``stage_origin_mm``) is regressed on the matching
    flux component. Slopes fill the diagonal of M, intercepts fill o.
    """
    origin = np.asarray(stage_origin_mm, dtype=float)
    slopes, offsets, r2 = np.empty(3), np.empty(3), np.empty(3)
    counts = {}
    for k, axis in enumerate(AXES):
        pts = [sp for sp in sweep if sp.axis == axis]
        pos = np.array([sp.commanded_mm for sp in pts], dtype=float) + origin[k]
        flux = np.array([np.asarray(sp.flux, dtype=float)[k] for sp in pts])
        counts[axis] = len(pts)
        if np.unique(pos).size < 2:
            raise DegenerateSweep(f"axis {axis} has fewer than 2 distinct commanded positions")
        if np.ptp(flux) == 0.0:
            raise DegenerateSweep(f"axis {axis} flux does not vary over the sweep")
        X = np.column_stack([flux, np.ones_like(flux)])
        (slope, intercept), *_ = np.linalg.lstsq(X, pos, rcond=None)
        resid = pos - X @ np.array([slope, intercept])
        ss_tot = np.sum((pos - pos.mean()) ** 2)
        slopes[k], offsets[k] = slope, intercept
        r2[k] = 1.0 - np.sum(resid**2) / ss_tot
    return PositionMapFit(PositionMap(slopes, offsets), r2, counts)


def quantize(b, chip: ChipModel) -> np.ndarray:
    """Round each axis to the nearest LSB multiple, halves away from zero."""
    b = np.asarray(b, dtype=float)
    res = np.asarray(chip.resolution, dtype=float)
    if b.ndim == 1 and b.size % 3 == 0 and b.size > 3:
        res = np.tile(res, b.size // 3)
    counts = np.sign(b) * np.floor(np.abs(b) / res + 0.5)
    return counts * res


def default_sources(g: SensorGeometry, moment: float = MAGNET_MOMENT) -> list[DipoleSource]:
    return [DipoleSource(moment, frame) for frame in g.magnet_frames()]


def flux_at_pose(g: SensorGeometry, center_pose: Transform, sources: Sequence[DipoleSource]) -> np.ndarray:
    """Noise-free (n, 3) flux with the centre piece (and sensors) at ``center_pose``.

    Each sensor sees only its own magnet.
    """
    out = np.empty((g.count, 3))
    for i, (frame, src) in enumerate(zip(g.sensor_frames, sources)):
        out[i] = dipole_flux(src, center_pose @ frame)
    return out


def corrupt(flux, chip: ChipModel | None, noise_sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. Gaussian noise, then quantize if a chip is given."""
    flux = np.asarray(flux, dtype=float)
    if noise_sigma > 0.0:
        flux = flux + rng.normal(0.0, noise_sigma, size=flux.shape)
    if chip is not None:
        flux = quantize(flux.reshape(-1, 3), chip).reshape(flux.shape)
    return flux


def synthesize_sample(
    g: SensorGeometry,
    center_pose: Transform,
    sources: Sequence[DipoleSource],
    chip: ChipModel | None = None,
    noise_sigma: float = 0.0,
    seed=None,
    timestamp_ms: float = 0.0,
) -> FluxSample:
    """Simulate one sensor reading; ``chip=None`` disables quantization."""
    clean = flux_at_pose(g, center_pose, sources)
    rng = np.random.default_rng(seed)
    return FluxSample(corrupt(clean, chip, noise_sigma, rng), timestamp_ms)


def sweep_grid() -> dict[str, np.ndarray]:
    """Stage positions of the single-magnet sweep: x, y in [-1, 1], z in [1, 3], 0.2 mm steps."""
    lateral = np.round(np.linspace(-1.0, 1.0, 11), 10)
    axial = np.round(np.linspace(1.0, 3.0, 11), 10)
    return {"x": lateral, "y": lateral, "z": axial}


def dipole_sweep(
    standoff_mm: float = 6.0,
    moment: float = MAGNET_MOMENT,
    chip: ChipModel | None = None,
    noise_sigma: float = 0.0,
    seed=None,
) -> list[SweepPoint]:
    """Sweep one magnet past a sensor at the origin with the dipole oracle.

    The stage zero puts the magnet ``standoff_mm`` above the chip centre;
    z commands move it further away, x/y commands move it laterally.
    """
    rng = np.random.default_rng(seed)
    sensor = Transform.identity()
    points = []
    for axis, values in sweep_grid().items():
        k = AXES.index(axis)
        for value in values:
            pos = np.array([0.0, 0.0, standoff_mm])
            pos[k] += value
            src = DipoleSource(moment, Transform.from_translation(pos))
            b = corrupt(dipole_flux(src, sensor), chip, noise_sigma, rng)
            points.append(SweepPoint(axis, float(value), b))
    return points


def linear_sweep(pmap: PositionMap, standoff_mm: float = 6.0) -> list[SweepPoint]:
    """Sweep whose flux is generated exactly by the inverse of ``pmap``."""
    points = []
    for axis, values in sweep_grid().items():
        k = AXES.index(axis)
        for value in values:
            pos = np.array([0.0, 0.0, standoff_mm])
            pos[k] += value
            points.append(SweepPoint(axis, float(value), pmap.inverse(pos)))
    return points
