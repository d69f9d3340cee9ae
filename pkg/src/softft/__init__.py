"""Six-axis force/torque estimation from a ring of magnetometers.

Magnets on a compliant centre piece move relative to Hall-effect chips; the
flux readings are mapped to magnet positions, registered rigidly to recover
the centre-piece deflection twist, and a calibrated stiffness turns that
twist into a wrench.
"""

from .calibration import CalibrationDataset, CalibrationResult, gravity_wrench, run_calibration
from .estimation import Estimator, estimate_tip_wrench, estimate_wrench, stream
from .exceptions import SoftFTError
from .geometry import GeometryConfig, SensorGeometry, build_geometry
from .liegroup import Transform, adjoint, exp_se3, log_se3, transform_wrench
from .magnetics import ChipModel, FluxSample, PositionMap, fit_position_map, position_from_flux
from .registration import arun_register, register_sample
from .sensitivity import SensitivityReport, range_estimate, sensitivity_report

__version__ = "0.1.0"

__all__ = [
    "CalibrationDataset",
    "CalibrationResult",
    "ChipModel",
    "Estimator",
    "FluxSample",
    "GeometryConfig",
    "PositionMap",
    "SensitivityReport",
    "SensorGeometry",
    "SoftFTError",
    "Transform",
    "adjoint",
    "arun_register",
    "build_geometry",
    "estimate_tip_wrench",
    "estimate_wrench",
    "exp_se3",
    "fit_position_map",
    "gravity_wrench",
    "log_se3",
    "position_from_flux",
    "range_estimate",
    "register_sample",
    "run_calibration",
    "sensitivity_report",
    "stream",
    "transform_wrench",
]
