# app/rutas/sweep.py
import argparse
import logging

from pydantic import ValidationError

from ..config import settings
from ..core import io_logic, sim_logic
from ..utils import responses as res
from ..utils.errors import NUMERIC_ERRORS, ConfigurationError

COMMAND = "sweep"


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="Robustness sweep over a true link length")
    parser.add_argument("--param", required=True, choices=("L2", "L4"))
    parser.add_argument("--from", dest="start", type=float, default=0.5)
    parser.add_argument("--to", dest="stop", type=float, default=1.1)
    parser.add_argument("--step", type=float, default=0.05)
    parser.add_argument("--scenario", default="1", help="Base scenario (built-in number or JSON path)")
    parser.add_argument("--workers", type=int, default=None, help="Parallel processes")
    parser.add_argument("--out", default=None)
    parser.set_defaults(handler=handle)
    return parser


def handle(args) -> res.CommandResponse:
    """
    Ejecuta el barrido y escribe sweep.csv.

    Returns:
        CommandResponse: Filas del barrido.
    """
    try:
        base = io_logic.load_scenario(args.scenario)
        fractions = sim_logic.sweep_fractions(args.start, args.stop, args.step)
        workers = args.workers if args.workers is not None else settings.SWEEP_WORKERS
        rows = sim_logic.robustness_sweep(base, args.param, fractions, workers=max(1, workers))
        path = io_logic.write_csv(io_logic.sweep_frame(rows), io_logic.output_dir(args.out) / "sweep.csv")
        failed = [row.fraction for row in rows if row.status != "ok"]
        message = "Sweep completed" if not failed else f"Sweep completed with {len(failed)} failed points"
        return res.ok(message, {
            "param": args.param,
            "rows": [row.model_dump() for row in rows],
            "failed_fractions": failed,
            "artifacts": {"sweep": str(path)},
        })
    except (ValidationError, ConfigurationError) as e:
        return res.config_error(f"Invalid sweep configuration: {str(e)}")
    except NUMERIC_ERRORS as e:
        return res.numeric_abort(f"Numeric error: {str(e)}")
    except OSError as e:
        logging.error(f"Error de E/S en el barrido: {str(e)}")
        return res.io_error(f"I/O error: {str(e)}")
