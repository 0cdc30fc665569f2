# app/core/io_logic.py
"""
Lógica de Entrada/Salida
========================
Carga de escenarios, emisión de trayectorias y tablas como CSV, métricas y
manifiestos como JSON, y huella SHA-256 de la configuración resuelta.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence

import pandas as pd
from pydantic import BaseModel

from .sim_logic import TrajectoryLog, get_scenario
from ..config import settings
from ..models import Metrics, RunManifest, ScenarioConfig, SweepRow

FLOAT_FORMAT = "%.9g"
BUILTIN_NAMES = ("1", "2", "3")


# ======================================================
# Columnas de la trayectoria
# ======================================================
def trajectory_columns() -> List[str]:
    cols = ["t"]
    cols += [f"qref{i}" for i in range(1, 7)]
    cols += [f"qT{i}" for i in range(1, 7)]
    cols += [f"qTbar{i}" for i in range(1, 7)]
    cols += ["x", "y", "z"]
    for axis in ("n", "s", "a"):
        cols += [f"{axis}{i}" for i in range(1, 4)]
    cols += ["ul1", "ur1", "v1", "ul2", "ur2", "v2", "mode", "active_channels"]
    return cols


def trajectory_frame(log: TrajectoryLog) -> pd.DataFrame:
    """
    Tabla de la trayectoria con las columnas en el orden del contrato CSV.
    """
    data: Dict[str, Any] = {"t": log.t}
    for name, block in (("qref", log.q_ref), ("qT", log.q_T), ("qTbar", log.q_bar)):
        for i in range(6):
            data[f"{name}{i + 1}"] = block[:, i]
    for i, axis in enumerate("xyz"):
        data[axis] = log.position[:, i]
    for j, axis in enumerate(("n", "s", "a")):
        for i in range(3):
            data[f"{axis}{i + 1}"] = log.rotation[:, i, j]
    for i, name in enumerate(("ul1", "ur1", "v1", "ul2", "ur2", "v2")):
        data[name] = log.used[:, i]
    data["mode"] = log.mode
    data["active_channels"] = log.active_channels
    return pd.DataFrame(data, columns=trajectory_columns())


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return path
    except OSError as e:
        logging.error(f"Error al escribir {path}: {str(e)}")
        raise


def write_json(data: Any, path: Path) -> Path:
    """
    Modelos pydantic en orden de declaración; otros datos con claves ordenadas.
    """
    if isinstance(data, BaseModel):
        text = data.model_dump_json(indent=2)
    else:
        text = json.dumps(data, indent=2, sort_keys=True)
    try:
        path.write_text(text + "\n", encoding="utf-8")
        return path
    except OSError as e:
        logging.error(f"Error al escribir {path}: {str(e)}")
        raise


# ======================================================
# Configuración
# ======================================================
def canonical_config(cfg: ScenarioConfig) -> Dict[str, Any]:
    return cfg.model_dump(mode="json")


def config_digest(cfg: ScenarioConfig) -> str:
    """
    SHA-256 del JSON canónico (claves ordenadas, separadores compactos).
    """
    text = json.dumps(canonical_config(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_scenario(ref: str) -> ScenarioConfig:
    """
    Resuelve "1", "2", "3" o la ruta de un JSON de escenario.

    Raises:
        OSError: Si el archivo no puede leerse.
        pydantic.ValidationError: Si el JSON no cumple el esquema.
    """
    if str(ref) in BUILTIN_NAMES:
        return get_scenario(str(ref))
    text = Path(ref).read_text(encoding="utf-8")
    return ScenarioConfig.model_validate_json(text)


def output_dir(out: str = None) -> Path:
    path = Path(out or settings.OUTPUT_DIR)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ======================================================
# Artefactos de un run
# ======================================================
def write_run(cfg: ScenarioConfig, log: TrajectoryLog, metrics: Metrics, out: Path) -> RunManifest:
    """
    Escribe trajectory.csv, metrics.json y manifest.json en out.
    """
    artifacts = {
        "trajectory": str(write_csv(trajectory_frame(log), out / "trajectory.csv")),
        "metrics": str(write_json(metrics, out / "metrics.json")),
    }
    manifest_path = out / "manifest.json"
    artifacts["manifest"] = str(manifest_path)
    manifest = RunManifest(
        config=canonical_config(cfg),
        artifacts=artifacts,
        tool_version=settings.APP_VERSION,
        config_digest=config_digest(cfg),
    )
    write_json(manifest, manifest_path)
    return manifest


def sweep_frame(rows: Sequence[SweepRow]) -> pd.DataFrame:
    columns = list(SweepRow.model_fields)
    return pd.DataFrame([row.model_dump() for row in rows], columns=columns)
