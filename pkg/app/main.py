# app/main.py
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.config import settings
from app.rutas import hough, lincheck, run, scenarios, sweep
from app.utils.responses import build_response, ExitCode

COMMANDS = (run, sweep, hough, lincheck, scenarios)


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None):
    """
    Configura el registro: flujo a stderr y, opcionalmente, archivo.

    Args:
        level (str, opcional): Nivel; por omisión settings.LOG_LEVEL.
        log_file (str, opcional): Archivo; por omisión settings.LOG_FILE.
    """
    level = (level or settings.LOG_LEVEL).upper()
    log_file = log_file or settings.LOG_FILE
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        try:
            Path(log_file).parent.mkdir(parents=True, exist_ok=True)
            handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
        except OSError as e:
            logging.error(f"Error al abrir el archivo de registro: {str(e)}")
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    """
    Construye el parser con un subcomando por módulo de rutas.
    """
    parser = argparse.ArgumentParser(
        prog="ibvs",
        description=f"{settings.APP_NAME} {settings.APP_VERSION}: feedforward-feedback adaptive IBVS simulation",
    )
    parser.add_argument("--log-level", default=None, help="Override IBVS_LOG_LEVEL")
    parser.add_argument("--log-file", default=None, help="Override IBVS_LOG_FILE")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS:
        module.add_parser(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Punto de entrada del CLI. Imprime el sobre JSON en stdout y devuelve el
    código de salida.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, args.log_file)
    try:
        response = args.handler(args)
    except Exception as e:
        logging.exception(f"Error inesperado en el subcomando {args.command}")
        response = build_response(False, f"Unexpected error: {str(e)}", code=ExitCode.NUMERIC_ABORT)
    return response.emit()
