"""Serial capture parsing and the CSV formats used for sweeps, samples and
calibration datasets.

Serial line grammar (one sensor per line, whitespace tolerant)::

    [t=<ms>] S<i>: <bx> <by> <bz>

Three integer fields are raw LSB counts and are scaled by the chip
resolution; any decimal field makes the line microtesla. A frame is one
line for every sensor index 0..n-1; a repeated index starts a new frame and
an incomplete frame is dropped.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .calibration import CalibrationDataset
from .exceptions import EmptyLog, InsufficientSamples, MalformedRow, SchemaMismatch
from .liegroup import Transform
from .magnetics import AXES, ChipModel, FluxSample, SweepPoint

_NUM = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?"
_LINE = re.compile(
    rf"^\s*(?:\[?\s*t\s*=\s*(?P<t>{_NUM})\s*\]?\s*[,;]?\s*)?S(?P<idx>\d+)\s*:\s*"
    rf"(?P<bx>{_NUM})[\s,]+(?P<by>{_NUM})[\s,]+(?P<bz>{_NUM})\s*$"
)
_INT = re.compile(r"^[-+]?\d+$")
FLOAT_FORMAT = ".17g"


@dataclass
class ParseReport:
    frames_parsed: int = 0
    frames_dropped: int = 0
    bad_lines: int = 0
    bad_line_numbers: list = field(default_factory=list)
    lines: int = 0


def _parse_line(line: str, numeric: str, chip: ChipModel):
    m = _LINE.match(line.replace("−", "-"))
    if m is None:
        return None
    tokens = (m["bx"], m["by"], m["bz"])
    values = np.array([float(tok) for tok in tokens])
    is_lsb = numeric == "lsb" or (numeric == "auto" and all(_INT.match(tok) for tok in tokens))
    if is_lsb:
        values = values * np.asarray(chip.resolution)
    t = float(m["t"]) if m["t"] is not None else None
    if not np.all(np.isfinite(values)) or (t is not None and not np.isfinite(t)):
        return None
    return int(m["idx"]), values, t


def parse_serial_log(
    text,
    sensor_count: int = 8,
    chip: ChipModel = ChipModel(),
    numeric: str = "auto",
    period_ms: float = 10.0,
) -> tuple[list[FluxSample], ParseReport]:
    """Assemble FluxSamples from a serial capture.

    ``numeric`` is "auto", "lsb" or "ut". Frames without timestamps are
    stamped ``frame_number * period_ms``. Raises EmptyLog if no frame is
    complete.
    """
    if numeric not in ("auto", "lsb", "ut"):
        raise ValueError(f"numeric must be auto, lsb or ut; got {numeric!r}")
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    report = ParseReport()
    samples: list[FluxSample] = []
    current: dict = {}
    current_t = None
    frame_no = 0

    def close(complete: bool):
        nonlocal current, current_t, frame_no
        if complete:
            flux = np.array([current[i] for i in range(sensor_count)])
            ts = current_t if current_t is not None else frame_no * period_ms
            samples.append(FluxSample(flux, ts))
            report.frames_parsed += 1
        else:
            report.frames_dropped += 1
        frame_no += 1
        current = {}
        current_t = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        report.lines += 1
        if not line.strip():
            continue
        parsed = _parse_line(line, numeric, chip)
        if parsed is None or parsed[0] >= sensor_count:
            report.bad_lines += 1
            report.bad_line_numbers.append(lineno)
            continue
        idx, values, t = parsed
        if idx in current:
            close(False)
        current[idx] = values
        if t is not None:
            current_t = t
        if len(current) == sensor_count:
            close(True)
    if current:
        close(False)
    if not samples:
        raise EmptyLog(f"no complete frames in {report.lines} lines")
    return samples, report


def average_frames(samples: Sequence[FluxSample], n: int) -> FluxSample:
    """Mean of the first ``n`` samples, stamped with the last one's time."""
    if n < 1:
        raise ValueError(f"window must be >= 1, got {n}")
    if len(samples) < n:
        raise InsufficientSamples(f"need {n} samples, got {len(samples)}")
    window = samples[:n]
    flux = np.mean([s.flux for s in window], axis=0)
    return FluxSample(flux, window[-1].timestamp_ms)


def block_average(samples: Sequence[FluxSample], n: int) -> list[FluxSample]:
    return [average_frames(samples[i : i + n], n) for i in range(0, len(samples) - n + 1, n)]


def _fmt(x) -> str:
    return format(float(x), FLOAT_FORMAT)


def dataset_header(sensor_count: int = 8) -> list[str]:
    pose = [f"t{r}{c}" for r in range(3) for c in range(4)]
    flux = [f"s{i}_b{a}_uT" for i in range(sensor_count) for a in AXES]
    return pose + ["mass_g", "lever_x_mm", "lever_y_mm", "lever_z_mm"] + flux


def write_dataset(path, ds: CalibrationDataset, sensor_count: int = 8) -> None:
    """Write one CSV row per record: 12 pose entries, mass, lever, flux stack.

    A rest flux, if present, goes in a leading ``# rest_flux:`` comment.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if ds.rest_flux is not None:
            fh.write("# rest_flux: " + " ".join(_fmt(v) for v in ds.rest_flux) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(dataset_header(sensor_count))
        for T, m, lever, b in zip(ds.poses, ds.masses_g, ds.levers_mm, ds.flux):
            row = [*T.matrix[:3].reshape(-1), m, *lever, *b]
            writer.writerow([_fmt(v) for v in row])


def read_dataset(path, sensor_count: int = 8) -> CalibrationDataset:
    expected = dataset_header(sensor_count)
    rest = None
    header = None
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("rest_flux:"):
                try:
                    rest = np.array([float(v) for v in body.split(":", 1)[1].split()])
                except ValueError as exc:
                    raise MalformedRow(lineno, f"bad rest flux: {exc}") from exc
            continue
        fields_ = next(csv.reader(io.StringIO(line)))
        if header is None:
            header = fields_
            if len(header) != len(expected):
                raise SchemaMismatch(f"expected {len(expected)} columns, header has {len(header)}")
            if header != expected:
                raise SchemaMismatch(f"unexpected column names: {header}")
            continue
        if len(fields_) != len(expected):
            raise SchemaMismatch(f"line {lineno}: expected {len(expected)} columns, got {len(fields_)}")
        try:
            values = np.array([float(v) for v in fields_])
        except ValueError as exc:
            raise MalformedRow(lineno, str(exc)) from exc
        if not np.all(np.isfinite(values)):
            raise MalformedRow(lineno, "non-finite value")
        rows.append(values)
    if header is None:
        raise SchemaMismatch("missing header row")
    if not rows:
        return CalibrationDataset([], np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3 * sensor_count)), rest)
    data = np.array(rows)
    poses = [Transform.from_matrix(r[:12].reshape(3, 4)) for r in data]
    try:
        return CalibrationDataset(poses, data[:, 12], data[:, 13:16], data[:, 16:], rest)
    except ValueError as exc:
        raise MalformedRow(0, str(exc)) from exc


SWEEP_HEADER = ["axis", "commanded_mm", "bx_uT", "by_uT", "bz_uT"]


def write_sweep(path, sweep: Sequence[SweepPoint]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for sp in sweep:
            writer.writerow([sp.axis, _fmt(sp.commanded_mm), *(_fmt(v) for v in sp.flux)])


def read_sweep(path) -> list[SweepPoint]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SWEEP_HEADER:
            raise SchemaMismatch(f"sweep header must be {SWEEP_HEADER}, got {header}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SWEEP_HEADER):
                raise SchemaMismatch(f"line {lineno}: expected 5 columns, got {len(row)}")
            if row[0] not in AXES:
                raise MalformedRow(lineno, f"unknown axis {row[0]!r}")
            try:
                nums = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise MalformedRow(lineno, str(exc)) from exc
            out.append(SweepPoint(row[0], nums[0], np.array(nums[1:])))
    return out


def write_samples(path, samples: Sequence[FluxSample]) -> None:
    n = samples[0].count if samples else 8
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp_ms"] + [f"s{i}_b{a}_uT" for i in range(n) for a in AXES])
        for s in samples:
            writer.writerow([_fmt(s.timestamp_ms), *(_fmt(v) for v in s.stacked())])


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
