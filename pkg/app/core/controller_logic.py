# app/core/controller_logic.py
"""
Lógica de Controladores
=======================
Síntesis y avance de todas las leyes de control:
    - Lazo articular interno (Youla) alrededor del doble integrador.
    - Banco externo adaptativo desacoplado por SVD.
    - Camino de prealimentación T_forward.
    - Supervisor de características medidas / estimadas.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from .camera_logic import CameraIntrinsics, within_bounds
from .lti_logic import (
    RationalSiso,
    StateSpaceBlock,
    feedback_block,
    freq_response,
    realize,
    svd6,
    tf_series,
    tf_unity_feedback,
)
from .servo_logic import LinearizedPlant
from ..utils.errors import ConfigurationError, NonFiniteError, ServoModelError


class InnerVariant(str, Enum):
    CORRECTED = "corrected"
    PRINTED = "printed"


class InnerPlant(str, Enum):
    CLOSED_LOOP = "closed_loop"
    DOUBLE_INTEGRATOR = "double_integrator"


class Mode(str, Enum):
    MEASURED = "measured"
    ESTIMATED = "estimated"


# ---------------- funciones de transferencia ----------------

def double_integrator() -> RationalSiso:
    return RationalSiso([1.0], [0.0, 0.0, 1.0])


def design_inner_controller(tau_in: float, variant: InnerVariant = InnerVariant.CORRECTED) -> RationalSiso:
    """
    Controlador articular G_c(s) = (3τs + 1)/(τ³s + 3τ²).

    La variante PRINTED usa el numerador (3τ²s + 1), que no reproduce el
    lazo cerrado de tercer orden; se conserva solo para comparación.
    """
    if tau_in <= 0:
        raise ConfigurationError(f"tau_in must be positive, got {tau_in}")
    lead = 3.0 * tau_in if InnerVariant(variant) == InnerVariant.CORRECTED else 3.0 * tau_in ** 2
    return RationalSiso([1.0, lead], [3.0 * tau_in ** 2, tau_in ** 3])


def inner_closed_loop(tau_in: float) -> RationalSiso:
    """
    T_inner(s) = (3τs + 1)/(τs + 1)³.
    """
    return RationalSiso([1.0, 3.0 * tau_in], P.polypow([1.0, tau_in], 3))


def butterworth(omega_n: float, zeta: float) -> RationalSiso:
    """
    Objetivo del lazo externo M_T = ω²/(s² + 2ζωs + ω²).
    """
    return RationalSiso([omega_n ** 2], [omega_n ** 2, 2.0 * zeta * omega_n, 1.0])


def youla_parameter(sigma: float, omega_n: float, zeta: float, tau_in: float) -> RationalSiso:
    """
    M_Y,i = M_T / (σ_i·T_inner).
    """
    return RationalSiso(
        omega_n ** 2 * P.polypow([1.0, tau_in], 3),
        sigma * P.polymul([1.0, 3.0 * tau_in], [omega_n ** 2, 2.0 * zeta * omega_n, 1.0]),
    )


def outer_controller(sigma: float, omega_n: float, zeta: float, tau_in: float) -> RationalSiso:
    """
    G_c,i(s) = ω²(τs + 1)³ / (σ_i (3τs + 1) s (s + 2ζω)).
    """
    return RationalSiso(
        omega_n ** 2 * P.polypow([1.0, tau_in], 3),
        sigma * P.polymul([1.0, 3.0 * tau_in], [0.0, 2.0 * zeta * omega_n, 1.0]),
    )


def feedforward_filter(tau_in: float, tau_forward: Optional[float] = None) -> RationalSiso:
    """
    T_forward(s) = (τs + 1)³ / ((3τs + 1)(τ_f s + 1)²) con τ_f = 0.1τ.
    """
    tau_f = 0.1 * tau_in if tau_forward is None else tau_forward
    return RationalSiso(
        P.polypow([1.0, tau_in], 3),
        P.polymul([1.0, 3.0 * tau_in], P.polypow([1.0, tau_f], 2)),
    )


def check_bandwidths(omega_n: float, zeta: float, tau_in: float):
    if tau_in <= 0:
        raise ConfigurationError("tau_in must be positive")
    if zeta <= 0:
        raise ConfigurationError("zeta must be positive")
    if omega_n <= 0 or omega_n * tau_in >= 1.0:
        raise ConfigurationError(
            f"outer bandwidth {omega_n} rad/s must stay below the inner bandwidth {1.0 / tau_in:.6g} rad/s"
        )


# ---------------- lazo interno ----------------

class InnerLoopModel:
    """
    Seis lazos articulares independientes con la perturbación d_qT sumada a
    la salida.

    Attributes:
        tau_in (float): Constante de tiempo del lazo interno (s).
        plant (InnerPlant): Forma cerrada o controlador + doble integrador.
        variant (InnerVariant): Variante del controlador articular.
    """

    def __init__(
        self,
        tau_in: float,
        plant: InnerPlant = InnerPlant.CLOSED_LOOP,
        variant: InnerVariant = InnerVariant.CORRECTED,
    ):
        self.tau_in = tau_in
        self.plant = InnerPlant(plant)
        self.variant = InnerVariant(variant)
        controller = design_inner_controller(tau_in, self.variant)
        if self.plant == InnerPlant.CLOSED_LOOP:
            loop = tf_unity_feedback(tf_series(controller, double_integrator()))
            self.block: StateSpaceBlock = realize(loop, channels=6)
        else:
            self.block = feedback_block(controller, double_integrator(), channels=6)

    def settle(self, q0) -> np.ndarray:
        return self.block.settle(np.asarray(q0, dtype=float))

    def step(self, q_ref, d_qT, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        """
        Un paso del lazo interno.

        Returns:
            tuple: (q_T, q̄_T = q_T + d_qT).
        """
        q_T = self.block.step(np.asarray(q_ref, dtype=float), dt)
        return q_T, q_T + np.asarray(d_qT, dtype=float)


def step_inner(model: InnerLoopModel, q_ref, d_qT, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    return model.step(q_ref, d_qT, dt)


# ---------------- banco externo ----------------

@dataclass(eq=False)
class OuterControllerBank:
    """
    Controlador externo desacoplado: u = V·diag(g_i·G0)·Uᵀ·e, con
    G0 = σ_i·G_c,i común a todos los canales y g_i = 1/σ_i en los canales
    activos.
    """
    U: np.ndarray
    V: np.ndarray
    sigma: np.ndarray
    active: np.ndarray
    block: StateSpaceBlock
    omega_n: float
    zeta: float
    tau_in: float
    sigma_tol: float
    redesigns: int = 0

    @property
    def gains(self) -> np.ndarray:
        safe = np.where(self.active, self.sigma, 1.0)
        return np.where(self.active, 1.0 / safe, 0.0)

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.active))

    def channel_controller(self, i: int) -> RationalSiso:
        if not self.active[i]:
            raise ServoModelError(f"channel {i + 1} is inactive")
        return outer_controller(float(self.sigma[i]), self.omega_n, self.zeta, self.tau_in)


def design_outer_bank(
    lin: LinearizedPlant,
    omega_n: float,
    zeta: float,
    tau_in: float,
    sigma_tol: float = 1e-6,
    prev: Optional[OuterControllerBank] = None,
) -> OuterControllerBank:
    """
    Diseña (o rediseña) el banco externo en el punto de linealización.

    Args:
        lin (LinearizedPlant): C1 y C2 del modelo linealizado.
        omega_n (float): Ancho de banda del lazo externo (rad/s).
        zeta (float): Amortiguamiento del objetivo.
        tau_in (float): Constante de tiempo del lazo interno (s).
        sigma_tol (float): Umbral relativo de canales activos.
        prev (OuterControllerBank, opcional): Banco anterior; se alinean los
            signos de U, V y se conservan los estados por canal.

    Returns:
        OuterControllerBank: Banco listo para step_outer.

    Raises:
        ConfigurationError: Si no se cumple ω_n·τ_in < 1.
        ServoModelError: Si ningún canal queda activo.
    """
    check_bandwidths(omega_n, zeta, tau_in)
    svd = svd6(lin.C1)
    U, V, sigma = svd.U.copy(), svd.V.copy(), svd.sigma
    active = sigma >= sigma_tol * sigma[0] if sigma[0] > 0 else np.zeros(6, dtype=bool)
    if not active.any():
        raise ServoModelError("all outer-loop channels are inactive")

    if prev is not None:
        flip = np.einsum("ij,ij->j", prev.U, U) < 0.0
        U[:, flip] *= -1.0
        V[:, flip] *= -1.0
        block = prev.block
        redesigns = prev.redesigns + 1
    else:
        g0 = outer_controller(1.0, omega_n, zeta, tau_in)
        block = realize(g0, channels=6)
        redesigns = 0
    # canales inactivos sin estado
    block.x[:, ~active] = 0.0
    return OuterControllerBank(
        U=U, V=V, sigma=sigma, active=active, block=block,
        omega_n=omega_n, zeta=zeta, tau_in=tau_in, sigma_tol=sigma_tol, redesigns=redesigns,
    )


def step_outer(bank: OuterControllerBank, e, dt: float) -> np.ndarray:
    """
    e' = Uᵀe; cada canal activo avanza su controlador; u = V·z.
    """
    e = np.asarray(e, dtype=float)
    if not np.all(np.isfinite(e)):
        raise NonFiniteError("non-finite feature error", bank.block.steps)
    inputs = np.where(bank.active, bank.U.T @ e, 0.0)
    y = bank.block.step(inputs, dt)
    return bank.V @ (bank.gains * y)


def closed_loop_frequency_check(
    lin: LinearizedPlant,
    bank: OuterControllerBank,
    tau_in: float,
    omegas: Sequence[float],
) -> List[dict]:
    """
    Respuesta en frecuencia del lazo linealizado p̄ -> p̂ con la planta
    C1·T_inner comparada con M_T en el subespacio activo.

    Returns:
        list[dict]: Por frecuencia, magnitud/fase del objetivo y del lazo y
        el error relativo máximo.
    """
    t_inner = inner_closed_loop(tau_in)
    g0 = outer_controller(1.0, bank.omega_n, bank.zeta, tau_in)
    target = butterworth(bank.omega_n, bank.zeta)
    Ua = bank.U[:, bank.active]
    rows = []
    for omega in omegas:
        K = bank.V @ np.diag(bank.gains * freq_response(g0, omega)) @ bank.U.T
        L = freq_response(t_inner, omega) * (lin.C1 @ K)
        T = np.linalg.solve(np.eye(6) + L, L)
        m_t = freq_response(target, omega)
        reduced = Ua.T @ T @ Ua
        rel = float(np.max(np.abs(reduced - m_t * np.eye(reduced.shape[0]))) / abs(m_t))
        diag = np.diag(reduced)
        rows.append({
            "omega": float(omega),
            "target_mag": float(abs(m_t)),
            "target_phase": float(np.angle(m_t)),
            "loop_mag": float(np.mean(np.abs(diag))),
            "loop_phase": float(np.mean(np.angle(diag))),
            "rel_error": rel,
        })
    return rows


# ---------------- prealimentación ----------------

class FeedforwardBlock:
    """
    Aproximación filtrada por T_forward desde las articulaciones iniciales
    hacia q_ff_target.
    """

    def __init__(self, tau_in: float, q_start, q_ff_target, tau_forward: Optional[float] = None):
        self.tau_in = tau_in
        self.tau_forward = 0.1 * tau_in if tau_forward is None else tau_forward
        self.tf = feedforward_filter(tau_in, self.tau_forward)
        self.q_ff_target = np.asarray(q_ff_target, dtype=float)
        self.block = realize(self.tf, channels=6)
        self.output = self.block.settle(np.asarray(q_start, dtype=float))

    def step(self, dt: float) -> np.ndarray:
        self.output = self.block.step(self.q_ff_target, dt)
        return self.output


def feedforward_reference(ff: FeedforwardBlock, dt: float) -> np.ndarray:
    return ff.step(dt)


# ---------------- supervisor ----------------

@dataclass
class SupervisorState:
    """
    Selección entre características medidas y estimadas con histéresis.

    Attributes:
        intr (CameraIntrinsics): Límites del plano imagen.
        mode (Mode): Modo actual.
        hysteresis_margin (float): Fracción del semiancho de imagen.
        transitions (int): Cambios de modo realizados.
    """
    intr: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    mode: Mode = Mode.MEASURED
    hysteresis_margin: float = 0.02
    transitions: int = 0

    def __post_init__(self):
        if not 0.0 <= self.hysteresis_margin <= 0.2:
            raise ConfigurationError("hysteresis_margin must lie in [0, 0.2]")
        self.mode = Mode(self.mode)


def select_features(
    sup: SupervisorState,
    measured: Optional[np.ndarray],
    flags: Sequence[bool],
    estimated: np.ndarray,
) -> Tuple[np.ndarray, Mode]:
    """
    Medido si todas las banderas son verdaderas y (ya se estaba en modo
    medido o las características caen dentro de los límites reducidos por
    el margen); estimado en otro caso.
    """
    if measured is None or not all(flags):
        new_mode = Mode.ESTIMATED
    elif sup.mode == Mode.MEASURED:
        new_mode = Mode.MEASURED
    else:
        m = np.asarray(measured, dtype=float)
        inside = within_bounds(sup.intr, m[0:3], sup.hysteresis_margin) and within_bounds(
            sup.intr, m[3:6], sup.hysteresis_margin
        )
        new_mode = Mode.MEASURED if inside else Mode.ESTIMATED
    if new_mode != sup.mode:
        sup.transitions += 1
        logging.info(f"Supervisor: cambio de modo {sup.mode.value} -> {new_mode.value}")
        sup.mode = new_mode
    used = np.asarray(measured, dtype=float) if new_mode == Mode.MEASURED else np.asarray(estimated, dtype=float)
    return used, new_mode
