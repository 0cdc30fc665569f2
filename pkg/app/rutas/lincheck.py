# app/rutas/lincheck.py
import argparse
import logging

import pandas as pd
from pydantic import ValidationError

from ..core import io_logic, sim_logic
from ..core.controller_logic import closed_loop_frequency_check, design_outer_bank
from ..core.servo_logic import jacobian
from ..utils import responses as res
from ..utils.errors import NUMERIC_ERRORS, ConfigurationError

COMMAND = "lin-check"
TOLERANCE = 1e-3


def parse_omegas(text: str) -> list:
    try:
        omegas = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"invalid frequency list: {text}")
    if not omegas or any(w < 0 for w in omegas):
        raise ConfigurationError("frequencies must be a non-empty list of non-negative values")
    return omegas


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(COMMAND, help="Linearized-loop frequency response against the Butterworth target")
    parser.add_argument("--scenario", required=True)
    parser.add_argument("--omega", default="0.1,1,10,30", help="Comma-separated frequencies (rad/s)")
    parser.add_argument("--out", default=None)
    parser.set_defaults(handler=handle)
    return parser


def handle(args) -> res.CommandResponse:
    """
    Linealiza el modelo en las articulaciones objetivo, diseña el banco y
    compara el lazo cerrado con el objetivo de segundo orden. Escribe
    lin_check.csv.
    """
    try:
        cfg = io_logic.load_scenario(args.scenario)
        omegas = parse_omegas(args.omega)
        setup = sim_logic.prepare(cfg)
        ctl = cfg.controller
        lin = jacobian(setup.model_plant, setup.q_ff_target)
        bank = design_outer_bank(lin, ctl.omega_n, ctl.zeta, ctl.tau_in, ctl.sigma_tol)
        rows = closed_loop_frequency_check(lin, bank, ctl.tau_in, omegas)
        path = io_logic.write_csv(pd.DataFrame(rows), io_logic.output_dir(args.out) / "lin_check.csv")
        worst = max(row["rel_error"] for row in rows)
        return res.ok("Linearized loop checked", {
            "active_channels": bank.active_count,
            "sigma": bank.sigma.tolist(),
            "rows": rows,
            "max_rel_error": worst,
            "within_tolerance": worst < TOLERANCE,
            "artifacts": {"lin_check": str(path)},
        })
    except (ValidationError, ConfigurationError) as e:
        return res.config_error(f"Invalid lin-check configuration: {str(e)}")
    except NUMERIC_ERRORS as e:
        return res.numeric_abort(f"Numeric error: {str(e)}")
    except OSError as e:
        logging.error(f"Error de E/S en lin-check: {str(e)}")
        return res.io_error(f"I/O error: {str(e)}")
