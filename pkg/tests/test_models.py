# tests/test_models.py
import io
import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.config import Settings
from app.core import io_logic
from app.core.camera_logic import default_camera_transform
from app.core.kinematics_logic import check_transform
from app.models import (
    CameraModel,
    ControllerModel,
    DisturbanceModel,
    Metrics,
    PoseModel,
    ScenarioConfig,
    StartModel,
    VisionModel,
)
from app.utils import responses as res

IDENTITY = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]


def minimal_config(**overrides) -> dict:
    data = {
        "start": {"joints_deg": [0.0] * 6},
        "target": {"position": [-1.0, 0.2, 0.3], "rotation": IDENTITY},
    }
    data.update(overrides)
    return data


def test_round_trip_with_defaults(scenarios):
    for cfg in scenarios.values():
        again = ScenarioConfig.model_validate_json(cfg.model_dump_json())
        assert again == cfg
        assert io_logic.config_digest(again) == io_logic.config_digest(cfg)


def test_defaults_are_resolved():
    cfg = ScenarioConfig.model_validate(minimal_config())
    assert cfg.dt_sim == 1e-4 and cfg.dt_ctrl == 1e-3 and cfg.horizon == 2.0
    assert cfg.substeps == 10
    assert cfg.samples == 2000
    assert cfg.controller.omega_n == 10.0 and cfg.controller.zeta == 0.707
    assert cfg.vision.mode == "ideal"
    assert cfg.controller.linearization_point == "commanded"


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(minimal_config(speed=3))
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(minimal_config(controller={"gain": 1.0}))


@pytest.mark.parametrize("overrides", [
    {"dt_sim": 3e-4},
    {"horizon": 1.0},
    {"horizon": 2.0005},
    {"controller": {"omega_n": 100.0, "tau_in": 0.01}},
    {"controller": {"hysteresis_margin": 0.5}},
    {"controller": {"linearization_point": "measured"}},
    {"vision": {"max_scale": 0}},
    {"vision": {"radius_floor": 2.0}},
    {"vision": {"marker_radii": [0.01, -0.01]}},
    {"start": {"joints_deg": [0.0] * 6, "pose": {"position": [0, 0, 1], "rotation": IDENTITY}}},
    {"start": {}},
    {"target": {"position": [0.0, 0.0, 1.0], "rotation": [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]}},
    {"target": {"position": [0.0, 0.0, 1.0], "rotation": [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]}},
])
def test_invalid_configs_rejected(overrides):
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(minimal_config(**overrides))


def test_rounded_rotation_is_projected(scenarios):
    T = scenarios["1"].start.pose.to_transform()
    check_transform(T)


def test_pose_columns_are_n_s_a():
    pose = PoseModel(position=[1.0, 2.0, 3.0], rotation=[[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
    T = pose.to_transform()
    np.testing.assert_allclose(T[:3, 2], [1.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(T[:3, 3], [1.0, 2.0, 3.0])


def test_camera_and_disturbance_helpers():
    assert np.allclose(CameraModel().to_pose().T, default_camera_transform())
    assert CameraModel().to_intrinsics().b == 0.12
    d = DisturbanceModel(d_qT_deg=[180.0, 0, 0, 0, 0, 90.0]).d_qT
    assert d[0] == pytest.approx(math.pi) and d[5] == pytest.approx(math.pi / 2)
    assert StartModel(joints_deg=[1, 2, 3, 4, 5, 6]).pose is None
    hough = VisionModel().to_hough()
    assert hough.r_max == 60 and hough.auto_window and hough.max_scale == 4
    assert ControllerModel(adaptation_stride=0).adaptation_stride == 0


def test_digest_changes_with_content():
    cfg = ScenarioConfig.model_validate(minimal_config())
    other = ScenarioConfig.model_validate(minimal_config(seed=7))
    digest = io_logic.config_digest(cfg)
    assert len(digest) == 64 and int(digest, 16) >= 0
    assert digest != io_logic.config_digest(other)
    assert digest == io_logic.config_digest(ScenarioConfig.model_validate(minimal_config()))


def test_models_are_written_in_field_order(tmp_path):
    metrics = Metrics(
        settling_time=None, settled=False, steady_state_error=[0.0, 0.0, 0.0], overshoot=[0.0, 0.0, 0.0],
        time_in_estimated_mode=0.0, final_position_error=0.1, max_orientation_error=0.2,
        final_orientation_error=0.2, mode_transitions=0,
    )
    text = io_logic.write_json(metrics, tmp_path / "metrics.json").read_text(encoding="utf-8")
    assert text == metrics.model_dump_json(indent=2) + "\n"
    assert list(json.loads(text))[:2] == ["settling_time", "settled"]
    assert Metrics.model_validate_json(text) == metrics
    plain = io_logic.write_json({"b": 1, "a": 2}, tmp_path / "plain.json").read_text(encoding="utf-8")
    assert list(json.loads(plain)) == ["a", "b"]


def test_response_envelope():
    buf = io.StringIO()
    code = res.config_error("bad", {"field": "x"}).emit(buf)
    assert code == 2
    payload = json.loads(buf.getvalue())
    assert payload == {"success": False, "message": "bad", "data": {"field": "x"}, "code": 2}
    assert res.ok().exit_code == 0
    assert res.numeric_abort().exit_code == 3
    assert res.io_error().exit_code == 4


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("IBVS_OUTPUT_DIR", "elsewhere")
    monkeypatch.setenv("IBVS_SWEEP_WORKERS", "4")
    settings = Settings()
    assert settings.OUTPUT_DIR == "elsewhere"
    assert settings.SWEEP_WORKERS == 4
    assert settings.LOG_LEVEL == "WARNING"
