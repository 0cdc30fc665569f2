# app/utils/responses.py

import json
import sys
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, Optional, Dict, TextIO


class ExitCode(IntEnum):
    OK = 0
    CONFIG_ERROR = 2
    NUMERIC_ABORT = 3
    IO_ERROR = 4


@dataclass(frozen=True)
class CommandResponse:
    """
    Respuesta uniforme de un subcomando del CLI.

    Atributos:
      - payload (dict): Estructura {"success", "message", "data", "code"}.
      - exit_code (int): Código de salida del proceso.
    """
    payload: Dict[str, Any]
    exit_code: int

    def emit(self, stream: Optional[TextIO] = None) -> int:
        """
        Escribe el payload como JSON en la salida y devuelve el código de salida.
        """
        out = stream if stream is not None else sys.stdout
        out.write(json.dumps(self.payload, indent=2, sort_keys=True) + "\n")
        return self.exit_code


def build_response(
    success: bool = True,
    message: str = "",
    data: Optional[Any] = None,
    code: int = ExitCode.OK
) -> CommandResponse:
    """
    Construye una respuesta uniforme para todos los subcomandos.

    Parámetros:
      - success (bool): Indica si la operación fue exitosa (True/False).
      - message (str): Mensaje descriptivo de la operación.
      - data (Any, opcional): Datos que se desean devolver al usuario.
      - code (int): Código de salida (por defecto 0).

    Retorna:
      - CommandResponse: payload con estructura
          {
            "success": bool,
            "message": str,
            "data": any,
            "code": int
          }
        y el código de salida correspondiente.
    """
    payload: Dict[str, Any] = {
        "success": bool(success),
        "message": str(message) if message is not None else "",
        "data": data,
        "code": int(code)
    }

    return CommandResponse(payload=payload, exit_code=int(code))


# =========================
# Helpers rápidos para usar en los subcomandos
# =========================

def ok(message: str = "OK", data: Any = None):
    """
    Respuesta estándar para éxito (código 0).
    """
    return build_response(True, message, data, ExitCode.OK)


def config_error(message: str = "Invalid configuration", data: Any = None):
    """
    Respuesta estándar para error de configuración (código 2).
    """
    return build_response(False, message, data, ExitCode.CONFIG_ERROR)


def numeric_abort(message: str = "Numeric abort", data: Any = None):
    """
    Respuesta estándar para aborto numérico de la simulación (código 3).
    """
    return build_response(False, message, data, ExitCode.NUMERIC_ABORT)


def io_error(message: str = "I/O error", data: Any = None):
    return build_response(False, message, data, ExitCode.IO_ERROR)
