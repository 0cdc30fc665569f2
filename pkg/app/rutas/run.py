# app/rutas/run.py
import argparse
import logging

from pydantic import ValidationError

from ..core import io_logic, sim_logic
from ..utils import responses as res
from ..utils.errors import NUMERIC_ERRORS, ConfigurationError, SimulationAbortError

COMMAND = "run"


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="Run one scenario and write its artifacts")
    parser.add_argument("--scenario", required=True, help="Built-in scenario 1, 2, 3 or a JSON config path")
    parser.add_argument("--out", default=None, help="Output directory")
    parser.set_defaults(handler=handle)
    return parser


def handle(args) -> res.CommandResponse:
    """
    Ejecuta un escenario y escribe trajectory.csv, metrics.json y
    manifest.json.

    Args:
        args (argparse.Namespace): scenario, out.

    Returns:
        CommandResponse: Métricas y rutas de los artefactos.
    """
    try:
        cfg = io_logic.load_scenario(args.scenario)
        log, metrics = sim_logic.run_scenario(cfg)
        manifest = io_logic.write_run(cfg, log, metrics, io_logic.output_dir(args.out))
        return res.ok("Scenario executed successfully", {
            "scenario": cfg.name,
            "metrics": metrics.model_dump(mode="json"),
            "artifacts": manifest.artifacts,
            "config_digest": manifest.config_digest,
        })
    except (ValidationError, ConfigurationError) as e:
        return res.config_error(f"Invalid scenario configuration: {str(e)}")
    except SimulationAbortError as e:
        return res.numeric_abort(str(e), {"sample_index": e.sample_index})
    except NUMERIC_ERRORS as e:
        return res.numeric_abort(f"Numeric error: {str(e)}")
    except OSError as e:
        logging.error(f"Error de E/S al ejecutar el escenario: {str(e)}")
        return res.io_error(f"I/O error: {str(e)}")
