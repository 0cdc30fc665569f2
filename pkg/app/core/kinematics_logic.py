# app/core/kinematics_logic.py
"""
Lógica de Cinemática
====================
Cinemática directa por Denavit–Hartenberg, puntos de la herramienta y
cinemática inversa cerrada del manipulador de codo con muñeca esférica.

Las transformaciones homogéneas son arreglos numpy de 4x4; las funciones
vectorizadas aceptan pilas (..., 4, 4) para evaluar muchas configuraciones a
la vez.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from itertools import product
from typing import Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import ConfigurationError, KinematicsError, OutOfWorkspaceError

SINGULAR_SIN = 1e-9


class Shoulder(str, Enum):
    FRONT = "shoulder_front"
    BACK = "shoulder_back"


class Elbow(str, Enum):
    UP = "elbow_up"
    DOWN = "elbow_down"


class Wrist(str, Enum):
    A = "wrist_a"
    B = "wrist_b"


@dataclass(frozen=True)
class DHRow:
    a: float
    alpha: float
    d: float
    theta_offset: float


@dataclass(frozen=True)
class RobotGeometry:
    """
    Dimensiones del manipulador (metros). Los valores por omisión son los
    del ABB IRB 4600.

    Attributes:
        L1, L2, L3, L4 (float): Longitudes de eslabón.
        a1 (float): Desplazamiento radial del hombro.
        Lt (float): Distancia del centro de muñeca a la brida.
        L_tool (float): Longitud del destornillador.
    """
    L1: float = 0.495
    L2: float = 0.9
    L3: float = 0.175
    L4: float = 0.96
    a1: float = 0.175
    Lt: float = 0.135
    L_tool: float = 0.127

    def __post_init__(self):
        for name in ("L1", "L2", "L3", "L4", "a1", "Lt", "L_tool"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"geometry length {name} must be positive, got {value}")

    @property
    def dh_rows(self) -> Tuple[DHRow, ...]:
        h = math.pi / 2
        return (
            DHRow(self.a1, -h, self.L1, 0.0),
            DHRow(self.L2, 0.0, 0.0, -h),
            DHRow(self.L3, -h, 0.0, 0.0),
            DHRow(0.0, h, self.L4, 0.0),
            DHRow(0.0, -h, 0.0, 0.0),
            DHRow(0.0, 0.0, self.Lt, math.pi),
        )

    def scaled(self, link: str, fraction: float) -> "RobotGeometry":
        """
        Copia con un eslabón escalado (usado por el barrido de robustez).
        """
        if link not in ("L1", "L2", "L3", "L4", "a1", "Lt", "L_tool"):
            raise ConfigurationError(f"unknown link {link}")
        return replace(self, **{link: getattr(self, link) * fraction})


@dataclass(frozen=True, eq=False)
class IkSolution:
    q: np.ndarray
    elbow: Elbow
    wrist: Wrist
    wrist_singular: bool = False
    shoulder: Shoulder = Shoulder.FRONT


def wrap_angle(angle):
    """
    Normaliza a (−π, π].
    """
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, 2 * np.pi) - np.pi
    wrapped = np.where(wrapped == -np.pi, np.pi, wrapped)
    return wrapped if np.ndim(wrapped) else float(wrapped)


def dh_transform(row: DHRow, theta_star) -> np.ndarray:
    """
    Transformación A_i = Rz(θ)·Tz(d)·Tx(a)·Rx(α) con θ = θ* + offset.

    Args:
        row (DHRow): Parámetros del eslabón.
        theta_star (float | np.ndarray): Ángulo(s) articular(es) en rad.

    Returns:
        np.ndarray: Matriz (..., 4, 4).
    """
    theta = np.asarray(theta_star, dtype=float) + row.theta_offset
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = math.cos(row.alpha), math.sin(row.alpha)
    T = np.zeros(theta.shape + (4, 4))
    T[..., 0, 0] = ct
    T[..., 0, 1] = -st * ca
    T[..., 0, 2] = st * sa
    T[..., 0, 3] = row.a * ct
    T[..., 1, 0] = st
    T[..., 1, 1] = ct * ca
    T[..., 1, 2] = -ct * sa
    T[..., 1, 3] = row.a * st
    T[..., 2, 1] = sa
    T[..., 2, 2] = ca
    T[..., 2, 3] = row.d
    T[..., 3, 3] = 1.0
    return T


def _chain(geom: RobotGeometry, q: np.ndarray, joints: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    rows = geom.dh_rows
    T = dh_transform(rows[0], q[..., 0])
    for i in range(1, joints):
        T = T @ dh_transform(rows[i], q[..., i])
    return T


def forward_kinematics(geom: RobotGeometry, q) -> np.ndarray:
    """
    T_E^O = A1·A2·A3·A4·A5·A6. Acepta q de forma (6,) o (N, 6).
    """
    return _chain(geom, q, 6)


def tool_points_base(geom: RobotGeometry, q) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posición en la base de los dos marcadores: P1 en la brida y P2 a
    L_tool/2 sobre el eje z6.
    """
    T = forward_kinematics(geom, q)
    p1 = T[..., :3, 3]
    p2 = p1 + 0.5 * geom.L_tool * T[..., :3, 2]
    return p1, p2


def wrist_center(geom: RobotGeometry, q) -> np.ndarray:
    T03 = _chain(geom, q, 3)
    d4 = geom.dh_rows[3].d
    return T03[..., :3, 3] + d4 * T03[..., :3, 2]


def make_transform(rotation, position) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = np.asarray(rotation, dtype=float)
    T[:3, 3] = np.asarray(position, dtype=float)
    return T


def invert_transform(T: np.ndarray) -> np.ndarray:
    R = T[:3, :3]
    return make_transform(R.T, -R.T @ T[:3, 3])


def nearest_rotation(m) -> np.ndarray:
    """
    Rotación más cercana (descomposición polar por SVD).
    """
    U, _, Vt = np.linalg.svd(np.asarray(m, dtype=float))
    fix = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt)) or 1.0])
    return U @ fix @ Vt


def rotation_angle(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """
    Ángulo geodésico entre dos rotaciones (rad).
    """
    c = (np.trace(Ra.T @ Rb) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def check_transform(T: np.ndarray, tol: float = 1e-9):
    T = np.asarray(T, dtype=float)
    if T.shape != (4, 4) or not np.all(np.isfinite(T)):
        raise KinematicsError("transform must be a finite 4x4 matrix")
    R = T[:3, :3]
    if np.max(np.abs(R.T @ R - np.eye(3))) >= tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise KinematicsError("rotation block is not orthonormal")
    if not np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0]):
        raise KinematicsError("bottom row must be [0, 0, 0, 1]")


def _arm_solution(geom: RobotGeometry, wc: np.ndarray, elbow: Elbow, shoulder: Shoulder) -> np.ndarray:
    rows = geom.dh_rows
    theta1 = math.atan2(wc[1], wc[0])
    r = math.hypot(wc[0], wc[1])
    if shoulder == Shoulder.BACK:
        # brazo girado π: el centro de muñeca queda detrás del hombro
        theta1 += math.pi
        r = -r
    px = r - rows[0].a
    py = rows[0].d - wc[2]
    L2 = rows[1].a
    D = math.hypot(rows[2].a, rows[3].d)
    beta = math.atan2(rows[3].d, rows[2].a)
    dist = math.hypot(px, py)
    c = (px * px + py * py - L2 * L2 - D * D) / (2.0 * L2 * D)
    if abs(c) > 1.0 + 1e-9:
        raise OutOfWorkspaceError(dist, (abs(L2 - D), L2 + D))
    gamma = math.acos(max(-1.0, min(1.0, c)))
    if elbow == Elbow.DOWN:
        gamma = -gamma
    phi = math.atan2(py, px) - math.atan2(D * math.sin(gamma), L2 + D * math.cos(gamma))
    theta2 = phi - rows[1].theta_offset
    theta3 = gamma - beta
    return np.array([theta1, theta2, theta3])


def _wrist_solution(R36: np.ndarray, wrist: Wrist, theta4_hint: float) -> Tuple[np.ndarray, bool]:
    # R36 = Rz(θ4)·Ry(−θ5)·Rz(θ6 + π)
    s5 = math.hypot(R36[0, 2], R36[1, 2])
    if s5 < SINGULAR_SIN:
        theta4 = theta4_hint
        if R36[2, 2] > 0:
            theta5 = 0.0
            roll = math.atan2(R36[1, 0], R36[0, 0]) - theta4
        else:
            theta5 = math.pi
            roll = theta4 - math.atan2(-R36[1, 0], -R36[0, 0])
        return np.array([theta4, theta5, roll - math.pi]), True
    if wrist == Wrist.B:
        s5 = -s5
    theta5 = math.atan2(s5, R36[2, 2])
    theta4 = math.atan2(-R36[1, 2] / s5, -R36[0, 2] / s5)
    roll = math.atan2(-R36[2, 1] / s5, R36[2, 0] / s5)
    return np.array([theta4, theta5, roll - math.pi]), False


def inverse_kinematics(
    geom: RobotGeometry,
    target: np.ndarray,
    elbow: Elbow = Elbow.UP,
    wrist: Wrist = Wrist.A,
    theta4_hint: float = 0.0,
    shoulder: Shoulder = Shoulder.FRONT,
) -> IkSolution:
    """
    Cinemática inversa cerrada: posición del centro de muñeca para θ1..θ3 y
    extracción de Euler de R36 para θ4..θ6.

    Args:
        geom (RobotGeometry): Geometría del robot.
        target (np.ndarray): Pose deseada T_E^O (4x4).
        elbow (Elbow): Rama del codo.
        wrist (Wrist): Rama de la muñeca.
        theta4_hint (float): Valor de θ4 en la singularidad de muñeca.
        shoulder (Shoulder): Hombro hacia el centro de muñeca o girado π.

    Returns:
        IkSolution: Ángulos normalizados a (−π, π] y bandera de singularidad.

    Raises:
        OutOfWorkspaceError: Si el centro de muñeca no es alcanzable.
    """
    target = np.asarray(target, dtype=float)
    check_transform(target, tol=1e-6)
    R = target[:3, :3]
    wc = target[:3, 3] - geom.Lt * R[:, 2]
    arm = _arm_solution(geom, wc, elbow, Shoulder(shoulder))
    R03 = _chain(geom, np.concatenate([arm, np.zeros(3)]), 3)[:3, :3]
    wrist_q, singular = _wrist_solution(R03.T @ R, wrist, theta4_hint)
    q = wrap_angle(np.concatenate([arm, wrist_q]))
    return IkSolution(q=q, elbow=elbow, wrist=wrist, wrist_singular=singular, shoulder=Shoulder(shoulder))


def unwrap_to(q, reference) -> np.ndarray:
    """
    Representante de q (mod 2π por articulación) más cercano a reference.
    """
    reference = np.asarray(reference, dtype=float)
    return reference + wrap_angle(np.asarray(q, dtype=float) - reference)


def solve_nearest(
    geom: RobotGeometry,
    target: np.ndarray,
    q_hint,
    elbows: Sequence[Elbow] = (Elbow.UP, Elbow.DOWN),
    unwrap: bool = False,
    shoulders: Sequence[Shoulder] = (Shoulder.FRONT, Shoulder.BACK),
) -> IkSolution:
    """
    Rama de la cinemática inversa más cercana a q_hint (distancia angular
    envuelta) entre las ocho combinaciones de hombro, codo y muñeca. Con unwrap=True los ángulos se devuelven desenvueltos
    respecto a q_hint.
    """
    q_hint = np.asarray(q_hint, dtype=float)
    best: Optional[IkSolution] = None
    best_cost = math.inf
    error: Optional[Exception] = None
    for shoulder, elbow, wrist in product(shoulders, elbows, (Wrist.A, Wrist.B)):
        try:
            sol = inverse_kinematics(
                geom, target, elbow, wrist, theta4_hint=float(wrap_angle(q_hint[3])), shoulder=shoulder
            )
        except OutOfWorkspaceError as e:
            error = e
            continue
        cost = float(np.linalg.norm(wrap_angle(sol.q - q_hint)))
        if cost < best_cost:
            best, best_cost = sol, cost
    if best is None:
        logging.error(f"Error al resolver la cinemática inversa: {str(error)}")
        raise error
    if unwrap:
        best = replace(best, q=unwrap_to(best.q, q_hint))
    return best
