# app/utils/errors.py
"""
Errores del workbench
=====================
Jerarquía de excepciones compartida por los módulos de lógica. Todas derivan de
ValueError para que los manejadores existentes que capturan ValueError sigan
funcionando.
"""
from typing import Optional


class WorkbenchError(ValueError):
    """Raíz de todos los errores de dominio."""


class ConfigurationError(WorkbenchError):
    """Configuración inválida o inconsistente."""


# ---------------- lti ----------------
class LtiError(WorkbenchError):
    pass


class ImproperTransferError(LtiError):
    pass


class PoleOnAxisError(LtiError):
    pass


class NonFiniteError(LtiError):
    """Entrada o estado no finito al integrar un bloque."""

    def __init__(self, message: str, step_index: Optional[int] = None):
        super().__init__(message)
        self.step_index = step_index


# ---------------- kinematics ----------------
class KinematicsError(WorkbenchError):
    pass


class OutOfWorkspaceError(KinematicsError):
    def __init__(self, distance: float, reach: tuple[float, float]):
        super().__init__(
            f"out of workspace: wrist distance {distance:.6f} m outside "
            f"[{reach[0]:.6f}, {reach[1]:.6f}] m"
        )
        self.distance = distance
        self.reach = reach


# ---------------- camera / vision ----------------
class CameraError(WorkbenchError):
    pass


class BehindCameraError(CameraError):
    pass


class InvalidDisparityError(CameraError):
    pass


class VisionError(WorkbenchError):
    pass


class MarkerOutOfViewError(VisionError):
    pass


class FeatureLossError(VisionError):
    pass


# ---------------- servo model ----------------
class ServoModelError(WorkbenchError):
    pass


class DegenerateFeatureError(ServoModelError):
    pass


class JacobianError(ServoModelError):
    def __init__(self, joint: int, message: str = ""):
        super().__init__(message or f"non-finite feature map around joint {joint + 1}")
        self.joint = joint


# ---------------- simulation ----------------
class SimulationAbortError(WorkbenchError):
    def __init__(self, sample_index: int, cause: Exception):
        super().__init__(f"simulation aborted at sample {sample_index}: {cause}")
        self.sample_index = sample_index
        self.cause = cause


# Errores que el CLI reporta como aborto numérico (código 3)
NUMERIC_ERRORS = (
    SimulationAbortError,
    LtiError,
    KinematicsError,
    CameraError,
    VisionError,
    ServoModelError,
)
