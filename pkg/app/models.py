# app/models.py
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .core.camera_logic import (
    DEFAULT_CAMERA_PITCH_DEG,
    DEFAULT_CAMERA_POSITION,
    CameraIntrinsics,
    CameraPose,
    camera_rotation,
)
from .core.controller_logic import InnerPlant, InnerVariant
from .core.kinematics_logic import RobotGeometry, make_transform, nearest_rotation
from .core.vision_logic import DEFAULT_MARKER_RADII, HoughParams, PixelMap

Vector3 = List[float]
Matrix3 = List[List[float]]

ORTHONORMAL_DEFECT = 1e-2


class StrictModel(BaseModel):
    """
    Base de todos los modelos de configuración: las claves desconocidas son
    un error.
    """
    model_config = ConfigDict(extra="forbid")


# Modelos de geometría y poses
class GeometryModel(StrictModel):
    """
    Dimensiones del robot en metros.

    Attributes:
        L1, L2, L3, L4 (float): Longitudes de eslabón.
        a1 (float): Desplazamiento radial del hombro.
        Lt (float): Distancia del centro de muñeca a la brida.
        L_tool (float): Longitud de la herramienta.
    """
    L1: float = Field(0.495, gt=0)
    L2: float = Field(0.9, gt=0)
    L3: float = Field(0.175, gt=0)
    L4: float = Field(0.96, gt=0)
    a1: float = Field(0.175, gt=0)
    Lt: float = Field(0.135, gt=0)
    L_tool: float = Field(0.127, gt=0)

    def to_geometry(self) -> RobotGeometry:
        return RobotGeometry(**self.model_dump())


class PoseModel(StrictModel):
    """
    Pose homogénea.

    Attributes:
        position (list[float]): Traslación (m).
        rotation (list[list[float]]): Matriz 3x3 por filas cuyas columnas son
            n̂, ŝ, â.
    """
    position: Vector3 = Field(..., min_length=3, max_length=3)
    rotation: Matrix3

    @field_validator("rotation")
    @classmethod
    def _check_rotation(cls, value: Matrix3) -> Matrix3:
        R = np.asarray(value, dtype=float)
        if R.shape != (3, 3) or not np.all(np.isfinite(R)):
            raise ValueError("rotation must be a finite 3x3 matrix")
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHONORMAL_DEFECT or np.linalg.det(R) <= 0:
            raise ValueError("rotation is not close to a proper rotation")
        return value

    def to_transform(self) -> np.ndarray:
        return make_transform(nearest_rotation(self.rotation), self.position)


class StartModel(StrictModel):
    """
    Estado inicial: pose cartesiana o ángulos articulares (grados).
    """
    pose: Optional[PoseModel] = None
    joints_deg: Optional[List[float]] = Field(None, min_length=6, max_length=6)

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.pose is None) == (self.joints_deg is None):
            raise ValueError("start needs exactly one of 'pose' or 'joints_deg'")
        return self


class DisturbanceModel(StrictModel):
    """
    Perturbación articular d_qT en grados, aplicada desde onset (s).
    """
    d_qT_deg: List[float] = Field(default_factory=lambda: [0.0] * 6, min_length=6, max_length=6)
    onset: float = Field(0.0, ge=0)

    @property
    def d_qT(self) -> np.ndarray:
        return np.radians(self.d_qT_deg)


class CameraModel(StrictModel):
    """
    Intrínsecos y pose de la cámara. Si rotation es None se usa la cámara
    mirando hacia +X0 inclinada pitch_deg hacia abajo.
    """
    f_u: float = Field(2.8, gt=0)
    f_v: float = Field(2.8, gt=0)
    s_c: float = 0.0
    u0: float = 0.0
    v0: float = 0.0
    b: float = Field(0.12, gt=0)
    fov_w: float = Field(86.09, gt=0, lt=180)
    fov_h: float = Field(55.35, gt=0, lt=180)
    z_min: float = Field(0.05, gt=0)
    position: Vector3 = Field(default_factory=lambda: list(DEFAULT_CAMERA_POSITION), min_length=3, max_length=3)
    pitch_deg: float = DEFAULT_CAMERA_PITCH_DEG
    rotation: Optional[Matrix3] = None

    def to_intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(
            f_u=self.f_u, f_v=self.f_v, s_c=self.s_c, u0=self.u0, v0=self.v0,
            b=self.b, fov_w=self.fov_w, fov_h=self.fov_h, z_min=self.z_min,
        )

    def to_pose(self) -> CameraPose:
        if self.rotation is None:
            R = camera_rotation(self.pitch_deg)
        else:
            R = nearest_rotation(PoseModel(position=self.position, rotation=self.rotation).rotation)
        return CameraPose(make_transform(R, self.position))


class ControllerModel(StrictModel):
    """
    Parámetros de los lazos de control.

    Attributes:
        tau_in (float): Constante de tiempo del lazo interno (s).
        omega_n (float): Ancho de banda del lazo externo (rad/s).
        zeta (float): Amortiguamiento del objetivo Butterworth.
        sigma_tol (float): Umbral relativo de canales activos.
        adaptation_stride (int): Rediseño cada N muestras; 0 congela la
            linealización inicial.
        hysteresis_margin (float): Margen del supervisor.
        inner_variant (InnerVariant): Controlador articular corregido o impreso.
        inner_plant (InnerPlant): Forma cerrada o doble integrador.
        feedforward_enabled (bool): Activa la prealimentación.
        feedback_enabled (bool): Activa la realimentación visual.
        tau_forward (float, opcional): Por omisión 0.1·tau_in.
        linearization_point (str): "commanded" linealiza en la salida q_T del
            lazo interno; "estimated" en F^-1 del modelo sobre las
            características medidas.
    """
    tau_in: float = Field(0.01, gt=0)
    omega_n: float = Field(10.0, gt=0)
    zeta: float = Field(0.707, gt=0)
    sigma_tol: float = Field(1e-6, gt=0, lt=1)
    adaptation_stride: int = Field(1, ge=0)
    hysteresis_margin: float = Field(0.02, ge=0, le=0.2)
    inner_variant: InnerVariant = InnerVariant.CORRECTED
    inner_plant: InnerPlant = InnerPlant.CLOSED_LOOP
    feedforward_enabled: bool = True
    feedback_enabled: bool = True
    tau_forward: Optional[float] = Field(None, gt=0)
    linearization_point: Literal["commanded", "estimated"] = "commanded"

    @model_validator(mode="after")
    def _bandwidth_ordering(self):
        if self.omega_n * self.tau_in >= 1.0:
            raise ValueError("outer bandwidth must be below the inner bandwidth (omega_n * tau_in < 1)")
        return self

    @property
    def resolved_tau_forward(self) -> float:
        return 0.1 * self.tau_in if self.tau_forward is None else self.tau_forward


class VisionModel(StrictModel):
    """
    Camino de visión: proyección ideal o render + Hough.
    """
    mode: Literal["ideal", "hough"] = "ideal"
    marker_radii: List[float] = Field(default_factory=lambda: list(DEFAULT_MARKER_RADII), min_length=2, max_length=2)
    width: int = Field(1280, ge=16)
    height: int = Field(720, ge=16)
    r_min: int = Field(3, ge=3)
    r_max: int = Field(60, ge=3)
    min_votes: int = Field(8, ge=1)
    vote_fraction: float = Field(0.5, gt=0, le=1)
    edge_threshold: float = Field(0.5, gt=0, lt=1)
    # rejilla y ventana de radios ajustadas a la escena renderizada
    auto_window: bool = True
    radius_floor: float = Field(5.0, ge=3)
    max_scale: int = Field(4, ge=1, le=8)

    @field_validator("marker_radii")
    @classmethod
    def _positive(cls, value: List[float]) -> List[float]:
        if any(r <= 0 for r in value):
            raise ValueError("marker radii must be positive")
        return value

    def to_hough(self) -> HoughParams:
        return HoughParams(
            r_min=self.r_min, r_max=self.r_max, min_votes=self.min_votes,
            vote_fraction=self.vote_fraction, edge_threshold=self.edge_threshold,
            auto_window=self.auto_window, radius_floor=self.radius_floor, max_scale=self.max_scale,
        )

    def to_pixel_map(self, intr: CameraIntrinsics) -> PixelMap:
        return PixelMap.for_intrinsics(intr, self.width, self.height)


class ScenarioConfig(StrictModel):
    """
    Escenario completo de simulación.

    Attributes:
        name (str): Nombre del escenario.
        start (StartModel): Estado inicial.
        target (PoseModel): Pose objetivo.
        disturbance (DisturbanceModel): Perturbación articular.
        camera (CameraModel): Cámara estéreo.
        controller (ControllerModel): Sintonía de los lazos.
        dt_sim, dt_ctrl, horizon (float): Pasos y horizonte (s).
        vision (VisionModel): Camino de visión.
        true_geometry (GeometryModel): Geometría de la planta.
        model_geometry (GeometryModel): Geometría usada por el controlador.
        seed (int): Semilla (no hay consumidores estocásticos en el lazo).
    """
    name: str = "custom"
    start: StartModel
    target: PoseModel
    disturbance: DisturbanceModel = Field(default_factory=DisturbanceModel)
    camera: CameraModel = Field(default_factory=CameraModel)
    controller: ControllerModel = Field(default_factory=ControllerModel)
    dt_sim: float = Field(1e-4, gt=0)
    dt_ctrl: float = Field(1e-3, gt=0)
    horizon: float = Field(2.0, gt=0)
    vision: VisionModel = Field(default_factory=VisionModel)
    true_geometry: GeometryModel = Field(default_factory=GeometryModel)
    model_geometry: GeometryModel = Field(default_factory=GeometryModel)
    seed: int = 0

    @model_validator(mode="after")
    def _timing(self):
        ratio = self.dt_ctrl / self.dt_sim
        if ratio < 1 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError("dt_ctrl must be an integer multiple of dt_sim")
        if self.horizon < 20.0 / self.controller.omega_n - 1e-12:
            raise ValueError("horizon must be at least 20 / omega_n")
        samples = self.horizon / self.dt_ctrl
        if abs(samples - round(samples)) > 1e-6 * max(samples, 1.0):
            raise ValueError("horizon must be an integer multiple of dt_ctrl")
        return self

    @property
    def substeps(self) -> int:
        return int(round(self.dt_ctrl / self.dt_sim))

    @property
    def samples(self) -> int:
        return int(round(self.horizon / self.dt_ctrl))


# Modelos de resultados
class Metrics(BaseModel):
    """
    Métricas de un escenario.

    Attributes:
        settling_time (Optional[float]): Primer t tras el cual el error de
            posición queda bajo el 2% del inicial; None si no se asienta.
        settled (bool): Indica si se asentó dentro del horizonte.
        steady_state_error (list[float]): Media de |error| por eje en el
            último 10% del horizonte (m).
        overshoot (list[float]): Sobrepaso por eje relativo a la norma del
            error inicial (%).
        time_in_estimated_mode (float): Tiempo en modo estimado (s).
        final_position_error (float): Norma del error final (m).
        max_orientation_error (float): Máximo error angular (rad).
        max_orientation_excursion (float): Máximo ángulo entre la orientación
            real y la que darían las articulaciones comandadas sin
            perturbación (rad).
        final_orientation_error (float): Error angular final (rad).
        mode_transitions (int): Cambios de modo del supervisor.
    """
    settling_time: Optional[float]
    settled: bool
    steady_state_error: List[float]
    overshoot: List[float]
    time_in_estimated_mode: float
    final_position_error: float
    max_orientation_error: float
    max_orientation_excursion: float = 0.0
    final_orientation_error: float
    mode_transitions: int


class RunManifest(BaseModel):
    """
    Manifiesto de una ejecución.

    Attributes:
        config (dict): Configuración resuelta con valores por omisión.
        artifacts (dict): Rutas de los artefactos escritos.
        tool_version (str): Versión de la herramienta.
        config_digest (str): SHA-256 de la configuración canónica.
    """
    config: Dict
    artifacts: Dict[str, str]
    tool_version: str
    config_digest: str


class SweepRow(BaseModel):
    param: str
    fraction: float
    error_pct: Optional[float] = None
    steady_state_error_x: Optional[float] = None
    settling_time: Optional[float] = None
    status: Literal["ok", "error"] = "ok"
    error: Optional[str] = None
