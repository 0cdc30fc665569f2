# app/core/camera_logic.py
"""
Lógica de Cámara Estéreo
========================
Modelo estenopeico de la cámara estéreo fija: extrínsecos, proyección a los
planos imagen izquierdo/derecho (en mm), triangulación y pertenencia al campo
de visión.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics_logic import check_transform, invert_transform, make_transform
from ..utils.errors import BehindCameraError, ConfigurationError, InvalidDisparityError

NEAR_PLANE = 1e-6
MIN_DISPARITY = 1e-12

# Pose por omisión: cámara frente al espacio de trabajo mirando hacia +X0,
# inclinada 18° hacia abajo, eje u de la imagen a lo largo de −Y0
DEFAULT_CAMERA_POSITION = (-2.0, 0.2, 0.8)
DEFAULT_CAMERA_PITCH_DEG = 18.0


@dataclass(frozen=True)
class CameraIntrinsics:
    """
    Parámetros intrínsecos (valores por omisión de una Zed 2).

    Attributes:
        f_u, f_v (float): Distancias focales (mm).
        s_c (float): Sesgo (mm).
        u0, v0 (float): Desplazamientos del punto principal (mm).
        b (float): Línea base (m).
        fov_w, fov_h (float): Ángulos de visión completos (grados).
        z_min (float): Profundidad mínima visible (m).
    """
    f_u: float = 2.8
    f_v: float = 2.8
    s_c: float = 0.0
    u0: float = 0.0
    v0: float = 0.0
    b: float = 0.12
    fov_w: float = 86.09
    fov_h: float = 55.35
    z_min: float = 0.05

    def __post_init__(self):
        if self.f_u <= 0 or self.f_v <= 0:
            raise ConfigurationError("focal lengths must be positive")
        if self.b <= 0:
            raise ConfigurationError("baseline must be positive")
        if not (0 < self.fov_w < 180 and 0 < self.fov_h < 180):
            raise ConfigurationError("view angles must lie in (0, 180) degrees")

    @property
    def u_max(self) -> float:
        return self.f_u * math.tan(math.radians(self.fov_w / 2))

    @property
    def v_max(self) -> float:
        return self.f_v * math.tan(math.radians(self.fov_h / 2))


@dataclass(frozen=True, eq=False)
class CameraPose:
    """
    T_C^O: marco de la cámara expresado en la base.
    """
    T: np.ndarray = field(default_factory=lambda: default_camera_transform())

    def __post_init__(self):
        check_transform(self.T)
        object.__setattr__(self, "_T_inv", invert_transform(np.asarray(self.T, dtype=float)))

    @property
    def T_inv(self) -> np.ndarray:
        return self._T_inv


@dataclass(frozen=True)
class ImagePoint:
    ul: float
    ur: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.ul, self.ur, self.v])


def camera_rotation(pitch_deg: float) -> np.ndarray:
    phi = math.radians(pitch_deg)
    s, c = math.sin(phi), math.cos(phi)
    return np.array([
        [0.0, -s, c],
        [-1.0, 0.0, 0.0],
        [0.0, -c, -s],
    ])


def default_camera_transform(
    position=DEFAULT_CAMERA_POSITION, pitch_deg: float = DEFAULT_CAMERA_PITCH_DEG
) -> np.ndarray:
    return make_transform(camera_rotation(pitch_deg), position)


def world_to_camera(pose: CameraPose, p_world) -> np.ndarray:
    """
    Aplica T_O^C = (T_C^O)^-1. Acepta (3,) o (..., 3).
    """
    Ti = pose.T_inv
    p = np.asarray(p_world, dtype=float)
    return p @ Ti[:3, :3].T + Ti[:3, 3]


def camera_to_world(pose: CameraPose, p_cam) -> np.ndarray:
    T = pose.T
    p = np.asarray(p_cam, dtype=float)
    return p @ T[:3, :3].T + T[:3, 3]


def project_array(intr: CameraIntrinsics, p_cam) -> np.ndarray:
    """
    Proyección vectorizada sin comprobar profundidad: (..., 3) -> (..., 3)
    con columnas [ul, ur, v] en mm.
    """
    p = np.asarray(p_cam, dtype=float)
    X, Y, Z = p[..., 0], p[..., 1], p[..., 2]
    centre = (intr.f_u * X + intr.s_c * Y + intr.u0 * Z) / Z
    half = intr.b * intr.f_u / (2.0 * Z)
    v = (intr.f_v * Y + intr.v0 * Z) / Z
    return np.stack([centre - half, centre + half, v], axis=-1)


def project(intr: CameraIntrinsics, p_cam) -> ImagePoint:
    """
    Proyecta un punto del marco de la cámara a los dos planos imagen.

    Raises:
        BehindCameraError: Si Z <= 1e-6 m.
    """
    p = np.asarray(p_cam, dtype=float)
    if not p[2] > NEAR_PLANE:
        raise BehindCameraError(f"point behind camera (Z={p[2]:.3g} m)")
    ul, ur, v = project_array(intr, p)
    return ImagePoint(float(ul), float(ur), float(v))


def triangulate(intr: CameraIntrinsics, point) -> np.ndarray:
    """
    Inversa de project: Z = b·f_u/(ur − ul).

    Raises:
        InvalidDisparityError: Si la disparidad no es positiva.
    """
    if isinstance(point, ImagePoint):
        ul, ur, v = point.ul, point.ur, point.v
    else:
        ul, ur, v = (float(c) for c in point)
    disparity = ur - ul
    if not disparity > MIN_DISPARITY:
        raise InvalidDisparityError(f"non-positive disparity {disparity:.3g} mm")
    Z = intr.b * intr.f_u / disparity
    Y = (v - intr.v0) * Z / intr.f_v
    X = ((0.5 * (ul + ur) - intr.u0) * Z - intr.s_c * Y) / intr.f_u
    return np.array([X, Y, Z])


def within_bounds(intr: CameraIntrinsics, image_point, margin: float = 0.0) -> bool:
    """
    Comprueba |ul|, |ur| <= (1 − margin)·u_max y |v| <= (1 − margin)·v_max.
    """
    ul, ur, v = np.asarray(
        image_point.as_array() if isinstance(image_point, ImagePoint) else image_point, dtype=float
    )
    scale = 1.0 - margin
    u_lim, v_lim = scale * intr.u_max, scale * intr.v_max
    return bool(abs(ul) <= u_lim and abs(ur) <= u_lim and abs(v) <= v_lim)


def in_view(intr: CameraIntrinsics, p_cam) -> bool:
    """
    Visible por ambas lentes y delante del plano cercano z_min.
    """
    p = np.asarray(p_cam, dtype=float)
    if not p[2] > intr.z_min:
        return False
    return within_bounds(intr, project_array(intr, p))
