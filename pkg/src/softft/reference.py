"""Values reported for the physical reference prototype.

These are golden fixtures for regression tests and report comparisons. The
twist units behind the stiffness matrix were never stated; treating the
translational part as metres reproduces the quoted force ranges, so
``REFERENCE_TWIST_LENGTH_UNIT_MM`` records that assumption.
"""

import numpy as np

REFERENCE_M_DIAG = np.array([0.4423, 0.3678, -0.0645])
REFERENCE_O = np.array([-22.0, -18.0, 8.0])

REFERENCE_K = 1e3 * np.array(
    [
        [-8.82, -11.33, -17.41, 0.03, 0.14, 0.02],
        [1.53, 12.77, 0.65, -0.21, -0.02, -0.06],
        [39.70, 27.12, -6.50, -0.03, 0.10, -0.04],
        [-0.13, -0.43, -0.02, 0.01, 0.00, 0.00],
        [-0.76, -0.54, -0.92, 0.00, 0.01, 0.00],
        [0.08, 0.02, 0.03, 0.00, 0.00, 0.01],
    ]
)
REFERENCE_TWIST_LENGTH_UNIT_MM = 1000.0

# singular values of the force / torque rows of KA (N/uT, Nm/uT)
REFERENCE_FORCE_SIGMAS = (6.07e-3, 2.88e-3)
REFERENCE_TORQUE_SIGMAS = (2.26e-3, 1.48e-3)
REFERENCE_FORCE_ISOTROPY = 0.47
REFERENCE_TORQUE_ISOTROPY = 0.65

# validation RMSE per axis: N, N, N, mNm, mNm, mNm
REFERENCE_RMSE = np.array([0.2338, 0.1136, 0.3775, 4.1, 10.6, 8.5])
REFERENCE_FORCE_ERROR_N = 0.45
REFERENCE_TORQUE_ERROR_NM = 0.014

# claimed full-scale ranges: Fx, Fy, Fz (N), Mx, My, Mz (Nm)
REFERENCE_RANGES = np.array([50.0, 50.0, 20.0, 0.2, 0.2, 0.2])
# maximum centre-piece travel along x, y, z (mm)
MAX_TRAVEL_MM = np.array([6.0, 6.0, 3.0])
# No rotational travel limit was published. This value is back-solved from
# the claimed 0.2 Nm torque range and the 10 Nm/rad diagonal torsional
# stiffness, so a torque-range comparison with it is a consistency check only.
MAX_ROTATION_RAD = 0.02


def reference_ka(seed: int = 0) -> np.ndarray:
    """Synthetic 6x24 KA whose force/torque row blocks carry the reported
    extreme singular values (middle values at the midpoint)."""
    from .sensitivity import synthetic_ka

    f_hi, f_lo = REFERENCE_FORCE_SIGMAS
    t_hi, t_lo = REFERENCE_TORQUE_SIGMAS
    return synthetic_ka(
        (f_hi, 0.5 * (f_hi + f_lo), f_lo),
        (t_hi, 0.5 * (t_hi + t_lo), t_lo),
        seed=seed,
    )
