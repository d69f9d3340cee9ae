"""Nominal frames of the Hall-effect sensors and magnets.

Layout convention (base frame {0}: z along the tool shaft toward the tip):

* sensor k sits on a ring of radius ``ring_radius_mm`` at azimuth
  ``k * 360 / sensor_count`` degrees, in the z = 0 plane;
* its z-axis (chip face normal) is tilted ``tilt_deg`` away from the tool
  axis toward the outward radial direction; with ``axial_split`` the even
  sensors tilt toward +z and the odd ones toward -z;
* its x-axis is the horizontal tangent of the ring, y completes a
  right-handed frame (so y is the chip-plane direction closest to the shaft);
* magnet k has the sensor's orientation and sits ``magnet_offset_mm`` along
  the sensor's +z.

At rest the centre-piece frame {C} coincides with {0}.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .exceptions import InvalidConfig
from .liegroup import Transform


@dataclass(frozen=True)
class GeometryConfig:
    sensor_count: int = 8
    tilt_deg: float = 25.0
    magnet_offset_mm: float = 6.0
    ring_radius_mm: float = 15.0
    axial_split: bool = True

    def validate(self, allow_degenerate_tilt: bool = False) -> None:
        if int(self.sensor_count) != self.sensor_count or self.sensor_count < 3:
            raise InvalidConfig(f"sensor_count must be an integer >= 3, got {self.sensor_count}")
        low_ok = self.tilt_deg >= 0.0 if allow_degenerate_tilt else self.tilt_deg > 0.0
        if not (low_ok and self.tilt_deg < 90.0):
            raise InvalidConfig(f"tilt_deg must lie in (0, 90), got {self.tilt_deg}")
        if not self.magnet_offset_mm > 0.0:
            raise InvalidConfig(f"magnet_offset_mm must be positive, got {self.magnet_offset_mm}")
        if not self.ring_radius_mm > 0.0:
            raise InvalidConfig(f"ring_radius_mm must be positive, got {self.ring_radius_mm}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> GeometryConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown geometry keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> GeometryConfig:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


@dataclass(frozen=True, eq=False)
class SensorGeometry:
    config: GeometryConfig
    sensor_frames: tuple  # Transform per sensor, {S_i} in {0}
    magnet_positions: np.ndarray  # (n, 3) nominal magnet origins in {0}, mm

    @property
    def count(self) -> int:
        return len(self.sensor_frames)

    @property
    def sensor_positions(self) -> np.ndarray:
        """Sensor origins in {C}; equal to their {0} values at rest."""
        return np.array([T.translation for T in self.sensor_frames])

    @property
    def sensor_rotations(self) -> np.ndarray:
        return np.array([T.rotation for T in self.sensor_frames])

    def magnet_frames(self) -> list[Transform]:
        return [Transform(T.rotation, p) for T, p in zip(self.sensor_frames, self.magnet_positions)]


def build_geometry(cfg: GeometryConfig = GeometryConfig(), *, allow_degenerate_tilt: bool = False) -> SensorGeometry:
    """Build the nominal sensor and magnet frames for ``cfg``.

    ``allow_degenerate_tilt`` admits tilt 0 (all chip normals parallel to
    the tool axis), which is only useful as a limiting case in tests.
    """
    cfg.validate(allow_degenerate_tilt=allow_degenerate_tilt)
    n = int(cfg.sensor_count)
    tilt = np.deg2rad(cfg.tilt_deg)
    frames = []
    magnets = np.empty((n, 3))
    for k in range(n):
        phi = 2.0 * np.pi * k / n
        radial = np.array([np.cos(phi), np.sin(phi), 0.0])
        tangent = np.array([-np.sin(phi), np.cos(phi), 0.0])
        side = -1.0 if (cfg.axial_split and k % 2) else 1.0
        z_axis = np.sin(tilt) * radial + side * np.cos(tilt) * np.array([0.0, 0.0, 1.0])
        x_axis = tangent
        y_axis = np.cross(z_axis, x_axis)
        R = np.column_stack([x_axis, y_axis, z_axis])
        origin = cfg.ring_radius_mm * radial
        frames.append(Transform(R, origin))
        magnets[k] = origin + cfg.magnet_offset_mm * z_axis
    magnets.setflags(write=False)
    return SensorGeometry(cfg, tuple(frames), magnets)


def nominal_magnet_positions(g: SensorGeometry) -> np.ndarray:
    """Registration targets: the magnet origins in {0} (copy, (n, 3))."""
    return np.array(g.magnet_positions)
