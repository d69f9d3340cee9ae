"""Command-line harness: synthetic experiments and dataset analysis.

Subcommands: sweep, calibrate, validate, analyze, parse-log. Every output
lands under ``--out`` with a fixed file name; figures are written next to
the delimited files unless ``--no-plots`` is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import datalog, reference
from .calibration import CalibrationResult, run_calibration
from .estimation import Estimator, estimate_wrench
from .exceptions import InvalidConfig, SoftFTError
from .geometry import GeometryConfig
from .magnetics import AXES, PositionMap, dipole_sweep, fit_position_map, linear_sweep
from .sensitivity import range_estimate, sensitivity_report
from .simulation import (
    SyntheticWorld,
    WorldConfig,
    calibration_poses,
    rmse_per_axis,
    validation_poses,
)

SWEEP_CSV = "sweep.csv"
POSITION_MAP_JSON = "position_map.json"
CALIBRATION_JSON = "calibration.json"
CALIBRATION_DATASET_CSV = "calibration_dataset.csv"
VALIDATION_CSV = "validation.csv"
VALIDATION_RECORDS_CSV = "validation_records.csv"
VALIDATION_SUMMARY_JSON = "validation_summary.json"
SENSITIVITY_JSON = "sensitivity.json"
SAMPLES_CSV = "samples.csv"
PARSE_REPORT_JSON = "parse_report.json"

WRENCH_AXES = ("Fx", "Fy", "Fz", "Mx", "My", "Mz")
WRENCH_UNITS = ("N", "N", "N", "mNm", "mNm", "mNm")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int | None
    noise_ut: float | None
    quantize: bool | None
    window: int | None
    world: str | None
    geometry: GeometryConfig
    out: Path
    dataset: Path | None
    calibration: Path | None
    position_map: Path | None
    plots: bool

    @classmethod
    def from_args(cls, args) -> ExperimentConfig:
        geometry = GeometryConfig.load(args.geometry) if args.geometry else GeometryConfig()
        geometry.validate()
        return cls(
            seed=args.seed,
            noise_ut=args.noise_ut,
            quantize=args.quantize,
            window=args.window,
            world=args.world,
            geometry=geometry,
            out=Path(args.out),
            dataset=Path(args.dataset) if args.dataset else None,
            calibration=Path(args.calibration) if args.calibration else None,
            position_map=Path(args.position_map) if args.position_map else None,
            plots=not args.no_plots,
        )

    def require_seed(self) -> int:
        if self.seed is None:
            raise InvalidConfig("--seed is required for synthetic runs")
        return self.seed

    def world_config(self, base: WorldConfig | None = None, default_model: str = "linear") -> WorldConfig:
        """World settings: ``base`` (e.g. from a calibration file) overridden by explicit flags."""
        base = base or WorldConfig(flux_model=default_model, geometry=self.geometry)
        changes = {}
        if self.world is not None:
            changes["flux_model"] = self.world
        if self.noise_ut is not None:
            changes["noise_ut"] = self.noise_ut
        if self.quantize is not None:
            changes["quantize"] = self.quantize
        if self.window is not None:
            changes["window"] = self.window
        return replace(base, **changes)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _print_matrix(name: str, X, fmt: str = "{:10.4f}") -> None:
    print(f"{name} =")
    for row in np.atleast_2d(X):
        print("  [" + " ".join(fmt.format(v) for v in row) + " ]")


def cmd_sweep(cfg: ExperimentConfig) -> dict:
    """Single-magnet position sweep and per-axis linear fit."""
    seed = cfg.require_seed()
    world = cfg.world_config(default_model="dipole")
    offset = cfg.geometry.magnet_offset_mm
    if world.flux_model == "dipole":
        chip = SyntheticWorld(replace(world, flux_model="linear")).chip
        sweep = dipole_sweep(offset, world.moment, chip, world.noise_ut, seed)
    else:
        sweep = linear_sweep(SyntheticWorld(world).true_map, offset)
    origin = (0.0, 0.0, offset)
    fit = fit_position_map(sweep, origin)
    out = datalog.ensure_dir(cfg.out)
    datalog.write_sweep(out / SWEEP_CSV, sweep)
    summary = {
        **fit.map.to_dict(),
        "r_squared": dict(zip(AXES, fit.r_squared.tolist())),
        "stage_origin_mm": list(origin),
        "points": fit.counts,
        "flux_model": world.flux_model,
        "seed": seed,
    }
    _write_json(out / POSITION_MAP_JSON, summary)
    print(f"{'axis':>4} {'points':>6} {'slope [mm/uT]':>14} {'intercept [mm]':>15} {'R^2':>7}")
    for k, axis in enumerate(AXES):
        print(f"{axis:>4} {fit.counts[axis]:>6} {fit.map.slopes[k]:>14.6g} {fit.map.offset[k]:>15.6g} "
              f"{fit.r_squared[k]:>7.3f}")
    print(f"total points: {len(sweep)}")
    if cfg.plots:
        from .plotting import plot_sweep

        plot_sweep(sweep, fit, out / "sweep.png", origin)
    return summary


def _load_position_map(cfg: ExperimentConfig, world: SyntheticWorld) -> PositionMap:
    """Position map from ``--position-map`` (e.g. a sweep's output), else the world's own."""
    if cfg.position_map is not None:
        return PositionMap.from_dict(json.loads(cfg.position_map.read_text(encoding="utf-8")))
    return world.position_map()


def cmd_calibrate(cfg: ExperimentConfig, subtract_rest: bool = False) -> CalibrationResult:
    """Build or load the calibration dataset and fit A and K."""
    world_cfg = cfg.world_config()
    world = SyntheticWorld(world_cfg)
    out = datalog.ensure_dir(cfg.out)
    if cfg.dataset is not None:
        dataset = datalog.read_dataset(cfg.dataset, cfg.geometry.sensor_count)
        source = str(cfg.dataset)
    else:
        seed = cfg.require_seed()
        dataset = world.make_dataset(calibration_poses(seed), np.random.default_rng([seed, 0]))
        datalog.write_dataset(out / CALIBRATION_DATASET_CSV, dataset, cfg.geometry.sensor_count)
        source = "synthetic"
    pmap = _load_position_map(cfg, world)
    result = run_calibration(dataset, world.geometry, pmap, subtract_rest=subtract_rest)
    result.metadata = {
        "seed": cfg.seed,
        "source": source,
        "world": world_cfg.to_dict(),
        "position_map": pmap.to_dict(),
        "twist_length_unit_mm": 1.0,
    }
    (out / CALIBRATION_JSON).write_text(result.to_json() + "\n", encoding="utf-8")

    s = result.sensitivity
    print(f"records: {result.n_records}   cond(B) = {result.cond_B:.3g}   cond(AB) = {result.cond_AB:.3g}")
    _print_matrix("K [N/mm | Nm/rad]", result.K)
    print("training residual RMS:", " ".join(f"{a}={v:.3g}" for a, v in zip(WRENCH_AXES, result.residual_rms)))
    print(f"forces:  sigma_max = {s.force_sigma_max:.3g} N/uT, sigma_min = {s.force_sigma_min:.3g} N/uT, "
          f"isotropy = {s.force_isotropy:.2f}")
    print(f"torques: sigma_max = {s.torque_sigma_max:.3g} Nm/uT, sigma_min = {s.torque_sigma_min:.3g} Nm/uT, "
          f"isotropy = {s.torque_isotropy:.2f}")
    if cfg.plots:
        from .plotting import plot_singular_values

        plot_singular_values(result.KA, out / "calibration_singular_values.png")
    return result


def _load_calibration(cfg: ExperimentConfig) -> CalibrationResult:
    path = cfg.calibration or (cfg.out / CALIBRATION_JSON)
    if not Path(path).exists():
        raise InvalidConfig(f"calibration file not found: {path}")
    return CalibrationResult.from_json(Path(path).read_text(encoding="utf-8"))


def rmse_table(rmse) -> list[list[str]]:
    """Rows of the per-axis RMSE table: header, values (N / mNm), units."""
    vals = np.asarray(rmse, dtype=float).copy()
    vals[3:] *= 1e3
    return [
        ["Quantity", *WRENCH_AXES],
        ["RMS error", *(repr(float(v)) for v in vals)],
        ["Units", *WRENCH_UNITS],
    ]


def cmd_validate(cfg: ExperimentConfig) -> dict:
    """Estimate wrenches on the 100 g validation set and tabulate RMSE."""
    result = _load_calibration(cfg)
    base = result.metadata.get("world")
    world_cfg = cfg.world_config(WorldConfig.from_dict(base) if base else None)
    world = SyntheticWorld(world_cfg)
    if cfg.dataset is not None:
        dataset = datalog.read_dataset(cfg.dataset, cfg.geometry.sensor_count)
    else:
        seed = cfg.require_seed()
        dataset = world.make_dataset(validation_poses(seed), np.random.default_rng([seed, 1]))
    estimator = Estimator.from_calibration(result)
    estimated = estimate_wrench(estimator, dataset.flux).reshape(len(dataset), 6)
    truth = dataset.wrenches()
    rmse = rmse_per_axis(estimated, truth)
    out = datalog.ensure_dir(cfg.out)
    table = rmse_table(rmse)
    with open(out / VALIDATION_CSV, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(table)
    with open(out / VALIDATION_RECORDS_CSV, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["record", *(f"{a}_true" for a in WRENCH_AXES), *(f"{a}_est" for a in WRENCH_AXES)])
        for i, (t, e) in enumerate(zip(truth, estimated)):
            writer.writerow([i, *(repr(float(v)) for v in t), *(repr(float(v)) for v in e)])
    summary = {
        "records": len(dataset),
        "rmse": dict(zip(WRENCH_AXES, rmse.tolist())),
        "force_error_N": float(np.linalg.norm(rmse[:3])),
        "torque_error_Nm": float(np.linalg.norm(rmse[3:])),
    }
    _write_json(out / VALIDATION_SUMMARY_JSON, summary)

    widths = [10] + [12] * 6
    for row in table[:1] + [[table[1][0], *(f"{float(v):.4g}" for v in table[1][1:])]] + table[2:]:
        print("".join(f"{c:>{w}}" for c, w in zip(row, widths)))
    ref = ["reference", *(f"{v:.4g}" for v in reference.REFERENCE_RMSE)]
    print("".join(f"{c:>{w}}" for c, w in zip(ref, widths)))
    print(f"overall: force {summary['force_error_N']:.4g} N, torque {summary['torque_error_Nm']:.4g} Nm "
          f"(reference prototype: {reference.REFERENCE_FORCE_ERROR_N} N, {reference.REFERENCE_TORQUE_ERROR_NM} Nm)")
    if cfg.plots:
        from .plotting import plot_validation

        plot_validation(estimated, truth, out / "validation.png")
    return summary


def cmd_analyze(cfg: ExperimentConfig, golden: bool = False, max_rotation_rad: float = reference.MAX_ROTATION_RAD) -> dict:
    """Sensitivity report and full-scale range estimate.

    With ``golden`` the reference prototype's K and a synthetic KA carrying
    its reported singular values are analysed instead of a calibration file.
    """
    if golden:
        K = reference.REFERENCE_K
        KA = reference.reference_ka()
        length_unit_mm = reference.REFERENCE_TWIST_LENGTH_UNIT_MM
    else:
        result = _load_calibration(cfg)
        K, KA = result.K, result.KA
        length_unit_mm = float(result.metadata.get("twist_length_unit_mm", 1.0))
    report = sensitivity_report(KA)
    limits = np.concatenate([reference.MAX_TRAVEL_MM / length_unit_mm, np.full(3, max_rotation_rad)])
    ranges = range_estimate(K, limits)
    data = {
        "sensitivity": report.to_dict(),
        "units": {"force_sigma": "N/uT", "torque_sigma": "Nm/uT", "force_range": "N", "torque_range": "Nm"},
        "deflection_limits": {"translation_mm": reference.MAX_TRAVEL_MM.tolist(), "rotation_rad": max_rotation_rad},
        "ranges": dict(zip(WRENCH_AXES, ranges.tolist())),
        "reference_ranges": dict(zip(WRENCH_AXES, reference.REFERENCE_RANGES.tolist())),
        "source": "reference" if golden else str(cfg.calibration or cfg.out / CALIBRATION_JSON),
    }
    out = datalog.ensure_dir(cfg.out)
    _write_json(out / SENSITIVITY_JSON, data)
    print(f"forces:  sigma_max = {report.force_sigma_max:.3g} N/uT, sigma_min = {report.force_sigma_min:.3g} N/uT, "
          f"isotropy = {report.force_isotropy:.2f}")
    print(f"torques: sigma_max = {report.torque_sigma_max:.3g} Nm/uT, sigma_min = {report.torque_sigma_min:.3g} Nm/uT, "
          f"isotropy = {report.torque_isotropy:.2f}")
    print(f"overall sigma_max(KA) = {report.sigma_max:.3g}")
    print(f"{'axis':>4} {'range':>10} {'reference':>10} unit")
    for a, r, c in zip(WRENCH_AXES, ranges, reference.REFERENCE_RANGES):
        print(f"{a:>4} {r:>10.4g} {c:>10.4g} {'N' if a[0] == 'F' else 'Nm'}")
    if cfg.plots:
        from .plotting import plot_singular_values

        plot_singular_values(KA, out / "sensitivity.png")
    return data


def cmd_parse_log(cfg: ExperimentConfig, log_path: Path, numeric: str = "auto") -> dict:
    text = Path(log_path).read_bytes()
    samples, report = datalog.parse_serial_log(text, cfg.geometry.sensor_count, numeric=numeric)
    out = datalog.ensure_dir(cfg.out)
    datalog.write_samples(out / SAMPLES_CSV, samples)
    data = {
        "frames_parsed": report.frames_parsed,
        "frames_dropped": report.frames_dropped,
        "bad_lines": report.bad_lines,
        "bad_line_numbers": report.bad_line_numbers,
        "lines": report.lines,
    }
    if cfg.window and cfg.window > 1:
        averaged = datalog.block_average(samples, cfg.window)
        datalog.write_samples(out / "averaged.csv", averaged)
        data["averaged_frames"] = len(averaged)
    _write_json(out / PARSE_REPORT_JSON, data)
    print(f"frames parsed: {report.frames_parsed}, dropped: {report.frames_dropped}, bad lines: {report.bad_lines}")
    return data


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="RNG seed (required for synthetic runs)")
    common.add_argument("--noise-ut", type=float, help="Gaussian flux noise sigma in uT")
    common.add_argument("--quantize", action=argparse.BooleanOptionalAction, default=None,
                        help="round flux to the chip LSB")
    common.add_argument("--window", type=int, help="samples averaged per measurement")
    common.add_argument("--world", choices=("linear", "dipole"), help="synthetic flux model")
    common.add_argument("--geometry", help="GeometryConfig JSON file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--dataset", help="calibration/validation dataset CSV")
    common.add_argument("--calibration", help="calibration JSON")
    common.add_argument("--position-map", help="PositionMap JSON (as written by sweep)")
    common.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    parser = argparse.ArgumentParser(prog="softft", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", parents=[common], help="position-mapping sweep and linear fit")
    p = sub.add_parser("calibrate", parents=[common], help="fit A and K")
    p.add_argument("--subtract-rest", action="store_true", help="remove rest flux before fitting")
    sub.add_parser("validate", parents=[common], help="per-axis RMSE on the validation set")
    p = sub.add_parser("analyze", parents=[common], help="sensitivity and range report")
    p.add_argument("--golden", action="store_true", help="analyse the reference prototype values")
    p.add_argument("--max-rotation-rad", type=float, default=reference.MAX_ROTATION_RAD)
    p = sub.add_parser("parse-log", parents=[common], help="parse a serial capture log")
    p.add_argument("log", help="serial log file")
    p.add_argument("--numeric", choices=("auto", "lsb", "ut"), default="auto")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_args(args)
        if args.command == "sweep":
            cmd_sweep(cfg)
        elif args.command == "calibrate":
            cmd_calibrate(cfg, subtract_rest=args.subtract_rest)
        elif args.command == "validate":
            cmd_validate(cfg)
        elif args.command == "analyze":
            cmd_analyze(cfg, golden=args.golden, max_rotation_rad=args.max_rotation_rad)
        elif args.command == "parse-log":
            cmd_parse_log(cfg, Path(args.log), args.numeric)
    except (SoftFTError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
