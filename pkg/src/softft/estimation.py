"""Runtime wrench estimation w = K A b-hat, streaming, and tool-tip composition."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .liegroup import MM_TO_M, hat
from .magnetics import FluxSample

NOMINAL_PERIOD_MS = 10.0
GAP_FACTOR = 2.0
GAP_DETECTED = "GapDetected"
STREAM_FIELDS = ("timestamp_ms", "fx", "fy", "fz", "mx", "my", "mz", "flags")


@dataclass(frozen=True, eq=False)
class Estimator:
    A: np.ndarray
    K: np.ndarray
    window: int = 1
    rest_flux: np.ndarray | None = None

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        K = np.array(self.K, dtype=float)
        if A.shape[0] != 6 or K.shape != (6, 6):
            raise ValueError(f"expected A (6, m) and K (6, 6), got {A.shape} and {K.shape}")
        if int(self.window) < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        KA = K @ A
        for arr in (A, K, KA):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "KA", KA)
        if self.rest_flux is not None:
            rest = np.array(self.rest_flux, dtype=float).reshape(A.shape[1])
            rest.setflags(write=False)
            object.__setattr__(self, "rest_flux", rest)

    @classmethod
    def from_calibration(cls, result, window: int = 1) -> Estimator:
        return cls(result.A, result.K, window, result.rest_flux)


def estimate_wrench(e: Estimator, b_hat) -> np.ndarray:
    """Wrench [f; m] for a flux stack (m,) or a batch (n, m)."""
    b = np.asarray(b_hat, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("flux stack has non-finite entries")
    if e.rest_flux is not None:
        b = b - e.rest_flux
    return b @ e.KA.T


def tip_adjoint(p_tip_mm) -> np.ndarray:
    """[[I, 0], [p^, I]] carrying a wrench from a sensor to a parallel tip frame."""
    Ad = np.eye(6)
    Ad[3:, :3] = hat(np.asarray(p_tip_mm, dtype=float) * MM_TO_M)
    return Ad


@dataclass(frozen=True, eq=False)
class TipRig:
    """Two sensors on one tool shaft, all frames parallel to the tip frame.

    Lever arms run from the tool tip to each sensor centre, in mm, expressed
    in the tip frame.
    """

    first: Estimator
    second: Estimator
    p1_tip_mm: np.ndarray
    p2_tip_mm: np.ndarray

    def __post_init__(self):
        p1 = np.array(self.p1_tip_mm, dtype=float).reshape(3)
        p2 = np.array(self.p2_tip_mm, dtype=float).reshape(3)
        if np.allclose(p1, p2):
            raise ValueError("the two sensors must sit at different stations on the shaft")
        object.__setattr__(self, "p1_tip_mm", p1)
        object.__setattr__(self, "p2_tip_mm", p2)

    def stacked_matrix(self) -> np.ndarray:
        """[Ad1 K1 A1 | Ad2 K2 A2]."""
        return np.hstack([
            tip_adjoint(self.p1_tip_mm) @ self.first.KA,
            tip_adjoint(self.p2_tip_mm) @ self.second.KA,
        ])


def compose_tip_wrench(w1, w2, p1_tip_mm, p2_tip_mm) -> np.ndarray:
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    f1, m1 = w1[:3], w1[3:]
    f2, m2 = w2[:3], w2[3:]
    p1 = np.asarray(p1_tip_mm, dtype=float) * MM_TO_M
    p2 = np.asarray(p2_tip_mm, dtype=float) * MM_TO_M
    f = f1 + f2
    m = m1 + m2 + np.cross(p1, f1) + np.cross(p2, f2)
    return np.concatenate([f, m])


def estimate_tip_wrench(rig: TipRig, b1, b2) -> np.ndarray:
    w1 = estimate_wrench(rig.first, b1)
    w2 = estimate_wrench(rig.second, b2)
    return compose_tip_wrench(w1, w2, rig.p1_tip_mm, rig.p2_tip_mm)


class StreamRecord(NamedTuple):
    timestamp_ms: float
    wrench: np.ndarray
    flags: tuple


def stream(
    e: Estimator,
    source: Iterable[FluxSample],
    period_ms: float = NOMINAL_PERIOD_MS,
) -> Iterator[StreamRecord]:
    """Emit one wrench per block of ``e.window`` samples.

    Blocks do not overlap and a trailing partial block is not emitted. The
    output timestamp is that of the last sample in the block. A gap larger
    than twice ``period_ms`` flags the next emission with GapDetected.
    """
    block = []
    last_ts = None
    gap = False
    for sample in source:
        ts = float(sample.timestamp_ms)
        if last_ts is not None:
            if ts < last_ts:
                raise ValueError(f"timestamps must be monotone: {ts} after {last_ts}")
            if ts - last_ts > GAP_FACTOR * period_ms:
                gap = True
        last_ts = ts
        block.append(sample.stacked())
        if len(block) == e.window:
            b = block[0] if e.window == 1 else np.mean(block, axis=0)
            flags = (GAP_DETECTED,) if gap else ()
            yield StreamRecord(ts, estimate_wrench(e, b), flags)
            block = []
            gap = False


def format_record(rec: StreamRecord) -> str:
    values = ",".join(repr(float(x)) for x in rec.wrench)
    return f"{rec.timestamp_ms!r},{values},{'|'.join(rec.flags)}"
