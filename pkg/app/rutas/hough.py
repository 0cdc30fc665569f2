# app/rutas/hough.py
import argparse
import logging

import numpy as np
from pydantic import ValidationError

from ..core import io_logic, sim_logic, vision_logic
from ..core.servo_logic import features_of_joints, marker_points
from ..utils import responses as res
from ..utils.errors import NUMERIC_ERRORS, ConfigurationError, FeatureLossError

COMMAND = "hough-demo"


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="Detect the two markers in a stereo PGM pair")
    parser.add_argument("--left", default=None, help="Left PGM image")
    parser.add_argument("--right", default=None, help="Right PGM image")
    parser.add_argument("--scenario", default="1", help="Scenario supplying camera and vision settings")
    parser.add_argument(
        "--render-from-pose", dest="render_from", choices=("start", "target"), default=None,
        help="Render the synthetic pair from the scenario pose instead of reading images",
    )
    parser.add_argument("--out", default=None)
    parser.set_defaults(handler=handle)
    return parser


def handle(args) -> res.CommandResponse:
    """
    Lee (o renderiza) el par estéreo, detecta círculos y escribe
    circles.json y features.json.
    """
    try:
        if args.render_from is None and (args.left is None or args.right is None):
            raise ConfigurationError("either --left and --right or --render-from-pose is required")
        cfg = io_logic.load_scenario(args.scenario)
        out = io_logic.output_dir(args.out)
        setup = sim_logic.prepare(cfg)
        plant = setup.true_plant
        base = cfg.vision.to_pixel_map(plant.intr)
        pmap, params = base, cfg.vision.to_hough()
        radii = cfg.vision.marker_radii
        artifacts = {}
        ideal = None

        if args.render_from is not None:
            q = setup.q_start if args.render_from == "start" else setup.q_ff_target
            points = marker_points(plant, q)
            pmap, params = vision_logic.plan_detection(points, radii, plant.pose, plant.intr, base, params)
            left, right = vision_logic.render_stereo(points, radii, plant.pose, plant.intr, pmap)
            artifacts["left"] = str(vision_logic.write_pgm(out / "left.pgm", left))
            artifacts["right"] = str(vision_logic.write_pgm(out / "right.pgm", right))
            ideal = features_of_joints(plant, q)[0].tolist()
            left_path, right_path = out / "left.pgm", out / "right.pgm"
        else:
            left_path, right_path = args.left, args.right

        left = vision_logic.read_pgm(left_path)
        right = vision_logic.read_pgm(right_path)
        if left.shape != right.shape:
            raise ConfigurationError(f"stereo images differ in size: {left.shape} vs {right.shape}")
        pmap = base.fit(left.shape)
        circles = {
            "left": [c.to_dict() for c in vision_logic.detect_markers(left, params)],
            "right": [c.to_dict() for c in vision_logic.detect_markers(right, params)],
        }
        artifacts["circles"] = str(io_logic.write_json(circles, out / "circles.json"))

        try:
            features = vision_logic.extract_feature_vector(left, right, params, pmap, plant.intr)
            result = {"features": features.tolist(), "ideal": ideal, "pixel_scale": pmap.width // base.width}
            if ideal is not None:
                result["max_abs_error_mm"] = float(np.max(np.abs(features - np.asarray(ideal))))
        except FeatureLossError as e:
            result = {"features": None, "ideal": ideal, "error": str(e)}
        artifacts["features"] = str(io_logic.write_json(result, out / "features.json"))

        if result["features"] is None:
            return res.numeric_abort(f"Feature loss: {result['error']}", {"circles": circles, "artifacts": artifacts})
        return res.ok("Markers detected", {"circles": circles, **result, "artifacts": artifacts})
    except (ValidationError, ConfigurationError) as e:
        return res.config_error(f"Invalid hough-demo configuration: {str(e)}")
    except NUMERIC_ERRORS as e:
        return res.numeric_abort(f"Numeric error: {str(e)}")
    except OSError as e:
        logging.error(f"Error de E/S en hough-demo: {str(e)}")
        return res.io_error(f"I/O error: {str(e)}")
