# app/core/servo_logic.py
"""
Lógica del Modelo de Servo
==========================
Mapa compuesto cámara-robot F (articulaciones -> características), su inversa
con el giro de la herramienta tomado de una pista, el Jacobiano por
diferencias centrales y la estimación de características.
"""

import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .camera_logic import (
    NEAR_PLANE,
    CameraIntrinsics,
    CameraPose,
    camera_to_world,
    project_array,
    triangulate,
    world_to_camera,
)
from .kinematics_logic import RobotGeometry, forward_kinematics, make_transform, solve_nearest, tool_points_base
from ..utils.errors import DegenerateFeatureError, JacobianError

JACOBIAN_STEP = 1e-6


@dataclass(frozen=True, eq=False)
class ServoPlant:
    """
    Planta del lazo externo.

    Attributes:
        geometry (RobotGeometry): Geometría del robot.
        intr (CameraIntrinsics): Intrínsecos de la cámara.
        pose (CameraPose): Pose de la cámara en la base.
    """
    geometry: RobotGeometry = field(default_factory=RobotGeometry)
    intr: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    pose: CameraPose = field(default_factory=CameraPose)


@dataclass(frozen=True, eq=False)
class LinearizedPlant:
    C1: np.ndarray
    C2: np.ndarray
    q0: np.ndarray


def marker_points(plant: ServoPlant, q) -> np.ndarray:
    """
    Centros de los marcadores en la base, forma (..., 2, 3).
    """
    p1, p2 = tool_points_base(plant.geometry, q)
    return np.stack([p1, p2], axis=-2)


def _features(plant: ServoPlant, q) -> Tuple[np.ndarray, np.ndarray]:
    pc = world_to_camera(plant.pose, marker_points(plant, q))
    with np.errstate(divide="ignore", invalid="ignore"):
        img = project_array(plant.intr, pc)
    ahead = pc[..., 2] > NEAR_PLANE
    img = np.where(ahead[..., None], img, np.nan)
    intr = plant.intr
    visible = (
        (pc[..., 2] > intr.z_min)
        & (np.abs(img[..., 0]) <= intr.u_max)
        & (np.abs(img[..., 1]) <= intr.u_max)
        & (np.abs(img[..., 2]) <= intr.v_max)
    )
    return img.reshape(img.shape[:-2] + (6,)), visible


def features_of_joints(plant: ServoPlant, q) -> Tuple[np.ndarray, Tuple[bool, bool]]:
    """
    p = F(q): puntos de la herramienta -> marco de la cámara -> proyección.

    Las características se calculan también fuera de la vista (plano imagen
    virtual extendido); las banderas indican la validez. Puntos detrás del
    plano cercano quedan como NaN.

    Returns:
        tuple: Vector de 6 características (mm) y banderas in_view por punto.
    """
    feats, visible = _features(plant, np.asarray(q, dtype=float))
    return feats, (bool(visible[0]), bool(visible[1]))


def estimate_features(plant: ServoPlant, q_T) -> np.ndarray:
    """
    Características estimadas con el modelo a partir de la salida del lazo
    interno q_T (sin perturbación). Las banderas se ignoran.
    """
    return features_of_joints(plant, q_T)[0]


def inverse_features(plant: ServoPlant, p, q_hint) -> np.ndarray:
    """
    q̃ = F^-1(p): triangula ambos marcadores, reconstruye la pose parcial
    (posición de la brida y eje â) y completa el giro alrededor de â con la
    cinemática directa de q_hint.

    Raises:
        InvalidDisparityError: Si algún punto tiene disparidad no positiva.
        DegenerateFeatureError: Si ambos marcadores coinciden.
        OutOfWorkspaceError: Si la pose reconstruida no es alcanzable.
    """
    p = np.asarray(p, dtype=float)
    q_hint = np.asarray(q_hint, dtype=float)
    p1 = camera_to_world(plant.pose, triangulate(plant.intr, p[0:3]))
    p2 = camera_to_world(plant.pose, triangulate(plant.intr, p[3:6]))
    axis = p2 - p1
    length = np.linalg.norm(axis)
    if length < 1e-9:
        raise DegenerateFeatureError("degenerate feature geometry: markers coincide")
    a = axis / length

    R_hint = forward_kinematics(plant.geometry, q_hint)[:3, :3]
    n = R_hint[:, 0] - (R_hint[:, 0] @ a) * a
    if np.linalg.norm(n) < 1e-6:
        # â del hint paralelo a n̂: se usa ŝ para fijar el giro
        s = R_hint[:, 1] - (R_hint[:, 1] @ a) * a
        s /= np.linalg.norm(s)
        n = np.cross(s, a)
    else:
        n /= np.linalg.norm(n)
    s = np.cross(a, n)
    target = make_transform(np.column_stack([n, s, a]), p1)
    return solve_nearest(plant.geometry, target, q_hint).q


def jacobian(plant: ServoPlant, q0, h: float = JACOBIAN_STEP) -> LinearizedPlant:
    """
    C1 por diferencias centrales con paso h por articulación; C2 = F(q0).

    Raises:
        JacobianError: Si F no es finito en la plantilla de alguna articulación.
    """
    q0 = np.asarray(q0, dtype=float)
    steps = h * np.eye(6)
    stencil = np.concatenate([q0 + steps, q0 - steps])
    feats, _ = _features(plant, stencil)
    C1 = (feats[:6] - feats[6:]).T / (2.0 * h)
    bad = ~np.all(np.isfinite(C1), axis=0)
    if bad.any():
        joint = int(np.flatnonzero(bad)[0])
        logging.error(f"Error al linealizar el modelo en la articulación {joint + 1}")
        raise JacobianError(joint)
    C2 = features_of_joints(plant, q0)[0]
    if not np.all(np.isfinite(C2)):
        raise JacobianError(0, "non-finite feature map at the linearization point")
    return LinearizedPlant(C1=C1, C2=C2, q0=q0.copy())
