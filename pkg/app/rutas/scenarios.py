# app/rutas/scenarios.py
import argparse

from ..core import io_logic, sim_logic
from ..models import ScenarioConfig
from ..utils import responses as res
from ..utils.errors import NUMERIC_ERRORS, ConfigurationError

COMMAND = "scenarios"


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="Show the built-in scenarios or the config schema")
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--print", dest="print_configs", action="store_true", help="Dump the three built-in configs")
    group.add_argument("--schema", action="store_true", help="Dump the JSON schema of a scenario config")
    parser.set_defaults(handler=handle)
    return parser


def handle(args) -> res.CommandResponse:
    try:
        if args.schema:
            return res.ok("Scenario config schema", ScenarioConfig.model_json_schema())
        configs = sim_logic.builtin_scenarios()
        return res.ok("Built-in scenarios", [
            {"config": io_logic.canonical_config(cfg), "config_digest": io_logic.config_digest(cfg)}
            for cfg in configs
        ])
    except ConfigurationError as e:
        return res.config_error(f"Invalid built-in scenario: {str(e)}")
    except NUMERIC_ERRORS as e:
        return res.numeric_abort(f"Numeric error: {str(e)}")
