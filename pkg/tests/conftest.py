# tests/conftest.py
import numpy as np
import pytest

from app.core import sim_logic
from app.core.camera_logic import CameraIntrinsics, CameraPose
from app.core.kinematics_logic import RobotGeometry
from app.core.servo_logic import ServoPlant


@pytest.fixture(scope="session")
def geometry() -> RobotGeometry:
    return RobotGeometry()


@pytest.fixture(scope="session")
def intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics()


@pytest.fixture(scope="session")
def camera_pose() -> CameraPose:
    return CameraPose()


@pytest.fixture(scope="session")
def plant(geometry, intrinsics, camera_pose) -> ServoPlant:
    return ServoPlant(geometry, intrinsics, camera_pose)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def scenarios():
    return {cfg.name: cfg for cfg in sim_logic.builtin_scenarios()}


@pytest.fixture(scope="session")
def scenario_runs(scenarios):
    """
    Ejecuciones en lazo cerrado de los escenarios incorporados, bajo demanda y
    compartidas por toda la sesión.
    """
    cache = {}

    def run(name: str):
        if name not in cache:
            cache[name] = sim_logic.run_scenario(scenarios[name])
        return cache[name]

    return run
