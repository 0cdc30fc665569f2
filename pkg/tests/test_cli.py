# tests/test_cli.py
import json

import numpy as np
import pytest

from app.main import main
from app.models import ScenarioConfig


def run_cli(capsys, *argv):
    code = main(list(argv))
    payload = json.loads(capsys.readouterr().out)
    assert payload["code"] == code
    return code, payload


def write_config(path, data) -> str:
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def test_scenarios_print(capsys):
    code, payload = run_cli(capsys, "scenarios", "--print")
    assert code == 0
    names = [item["config"]["name"] for item in payload["data"]]
    assert names == ["1", "2", "3"]
    assert all(len(item["config_digest"]) == 64 for item in payload["data"])


def test_scenarios_schema(capsys):
    code, payload = run_cli(capsys, "scenarios", "--schema")
    assert code == 0
    assert payload["data"] == ScenarioConfig.model_json_schema()


def test_unknown_key_is_config_error(capsys, tmp_path, scenarios):
    data = scenarios["1"].model_dump(mode="json")
    data["bogus"] = 1
    code, payload = run_cli(capsys, "run", "--scenario", write_config(tmp_path / "bad.json", data), "--out", str(tmp_path))
    assert code == 2
    assert not payload["success"]


def test_missing_file_is_io_error(capsys, tmp_path):
    code, _ = run_cli(capsys, "run", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path))
    assert code == 4


def test_unreachable_start_is_numeric_abort(capsys, tmp_path, scenarios):
    data = scenarios["2"].model_dump(mode="json")
    data["start"] = {"pose": {"position": [4.0, 0.0, 1.0], "rotation": data["target"]["rotation"]}}
    code, payload = run_cli(capsys, "run", "--scenario", write_config(tmp_path / "far.json", data), "--out", str(tmp_path))
    assert code == 3
    assert "workspace" in payload["message"]


def test_lin_check(capsys, tmp_path):
    code, payload = run_cli(capsys, "lin-check", "--scenario", "1", "--out", str(tmp_path))
    assert code == 0
    assert payload["data"]["within_tolerance"]
    assert payload["data"]["active_channels"] == 5
    assert [row["omega"] for row in payload["data"]["rows"]] == [0.1, 1.0, 10.0, 30.0]
    assert (tmp_path / "lin_check.csv").exists()


def test_lin_check_rejects_bad_frequencies(capsys, tmp_path):
    code, _ = run_cli(capsys, "lin-check", "--scenario", "1", "--omega", "1,abc", "--out", str(tmp_path))
    assert code == 2


def test_hough_demo_renders_target(capsys, tmp_path):
    code, payload = run_cli(capsys, "hough-demo", "--scenario", "1", "--render-from-pose", "target", "--out", str(tmp_path))
    assert code == 0
    assert len(payload["data"]["circles"]["left"]) == 2
    assert payload["data"]["max_abs_error_mm"] < 0.0041
    for name in ("left.pgm", "right.pgm", "circles.json", "features.json"):
        assert (tmp_path / name).exists()


def test_hough_demo_reads_images(capsys, tmp_path):
    run_cli(capsys, "hough-demo", "--render-from-pose", "target", "--out", str(tmp_path / "render"))
    first = (tmp_path / "render" / "features.json").read_bytes()
    code, payload = run_cli(
        capsys, "hough-demo",
        "--left", str(tmp_path / "render" / "left.pgm"),
        "--right", str(tmp_path / "render" / "right.pgm"),
        "--out", str(tmp_path / "read"),
    )
    assert code == 0
    np.testing.assert_allclose(payload["data"]["features"], json.loads(first)["features"], atol=1e-3)
    assert payload["data"]["pixel_scale"] == json.loads(first)["pixel_scale"]


def test_hough_demo_needs_images_or_pose(capsys, tmp_path):
    code, _ = run_cli(capsys, "hough-demo", "--out", str(tmp_path))
    assert code == 2


def test_hough_demo_renders_scenario_one_start(capsys, tmp_path):
    code, payload = run_cli(capsys, "hough-demo", "--scenario", "1", "--render-from-pose", "start", "--out", str(tmp_path))
    assert code == 0
    assert payload["data"]["pixel_scale"] > 1
    assert len(payload["data"]["circles"]["left"]) == 2
    assert payload["data"]["max_abs_error_mm"] < 0.0082


def test_hough_demo_out_of_view_start(capsys, tmp_path):
    # la pose inicial del escenario 2 deja los marcadores fuera del campo de visión
    code, _ = run_cli(capsys, "hough-demo", "--scenario", "2", "--render-from-pose", "start", "--out", str(tmp_path))
    assert code == 3


@pytest.mark.slow
def test_run_is_byte_identical(capsys, tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code, payload = run_cli(capsys, "run", "--scenario", "1", "--out", str(out))
        assert code == 0
        assert payload["data"]["metrics"]["settled"]
        outputs.append({f: (out / f).read_bytes() for f in ("trajectory.csv", "metrics.json")})
    assert outputs[0] == outputs[1]
    header = outputs[0]["trajectory.csv"].split(b"\n", 1)[0].decode()
    assert header.startswith("t,qref1,")
    assert header.endswith(",mode,active_channels")


@pytest.mark.slow
def test_sweep_writes_table(capsys, tmp_path):
    code, payload = run_cli(
        capsys, "sweep", "--param", "L4", "--from", "0.95", "--to", "1.05", "--step", "0.05", "--out", str(tmp_path)
    )
    assert code == 0
    assert [row["fraction"] for row in payload["data"]["rows"]] == [0.95, 1.0, 1.05]
    assert (tmp_path / "sweep.csv").read_text().startswith("param,fraction,error_pct")
