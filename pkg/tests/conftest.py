import numpy as np
import pytest

from softft.geometry import build_geometry
from softft.simulation import SyntheticWorld, WorldConfig, calibration_poses, validation_poses


@pytest.fixture(scope="session")
def geometry():
    return build_geometry()


@pytest.fixture(scope="session")
def linear_world():
    return SyntheticWorld(WorldConfig(flux_model="linear"))


@pytest.fixture(scope="session")
def linear_datasets(linear_world):
    """Noise-free (calibration, validation) datasets from the linear world."""
    cal = linear_world.make_dataset(calibration_poses(0), np.random.default_rng(0))
    val = linear_world.make_dataset(validation_poses(0), np.random.default_rng(1))
    return cal, val


def random_twist(rng, max_rot=1.0, max_trans=5.0):
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    w = axis * rng.uniform(0.0, max_rot)
    v = rng.uniform(-max_trans, max_trans, 3)
    return np.concatenate([v, w])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: s.split("] ", 1)[1]):
        terminalreporter.write_line(line)
