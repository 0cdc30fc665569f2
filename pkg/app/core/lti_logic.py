# app/core/lti_logic.py
"""
Lógica LTI
==========
Funciones de transferencia racionales sobre python-control (coeficientes
guardados en potencias ascendentes de s), realización en espacio de estados,
integración RK4 de paso fijo con entrada retenida (ZOH) y SVD de matrices
6x6.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Sequence, Union

import control
import numpy as np
from numpy.polynomial import polynomial as P

from ..utils.errors import ImproperTransferError, LtiError, NonFiniteError, PoleOnAxisError

ArrayLike = Union[float, Sequence[float], np.ndarray]


def _trim(coeffs: np.ndarray) -> np.ndarray:
    # quita ceros de las potencias más altas, conserva al menos un coeficiente
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1].copy()


@dataclass(frozen=True)
class RationalSiso:
    """
    Función de transferencia escalar num(s)/den(s).

    Attributes:
        num (tuple): Coeficientes del numerador, potencias ascendentes de s.
        den (tuple): Coeficientes del denominador, potencias ascendentes de s.
            Tras la construcción el coeficiente principal vale 1.
    """
    num: tuple
    den: tuple

    def __post_init__(self):
        den = _trim(self.den)
        if den[-1] == 0.0:
            raise ImproperTransferError("denominator is identically zero")
        num = _trim(self.num)
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise ImproperTransferError("non-finite coefficients")
        if len(num) > len(den):
            raise ImproperTransferError(
                f"improper transfer function: numerator degree {len(num) - 1} "
                f"> denominator degree {len(den) - 1}"
            )
        lead = den[-1]
        object.__setattr__(self, "num", tuple(float(c) for c in num / lead))
        object.__setattr__(self, "den", tuple(float(c) for c in den / lead))

    @classmethod
    def from_control(cls, sys: control.TransferFunction) -> "RationalSiso":
        if not sys.issiso():
            raise LtiError(f"expected a SISO system, got {sys.noutputs}x{sys.ninputs}")
        if not sys.isctime():
            raise LtiError("expected a continuous-time system")
        num, den = control.tfdata(sys)
        return cls(tuple(np.asarray(num[0][0], dtype=float)[::-1]), tuple(np.asarray(den[0][0], dtype=float)[::-1]))

    @property
    def sys(self) -> control.TransferFunction:
        """
        Vista python-control (potencias descendentes).
        """
        return control.tf(list(self.num[::-1]), list(self.den[::-1]))

    @property
    def order(self) -> int:
        return len(self.den) - 1

    @property
    def dc_gain(self) -> float:
        return self.num[0] / self.den[0]


def tf_series(a: RationalSiso, b: RationalSiso) -> RationalSiso:
    """
    Conexión en serie a·b. No se cancelan polos y ceros.
    """
    return RationalSiso.from_control(control.series(a.sys, b.sys))


def tf_unity_feedback(loop: RationalSiso) -> RationalSiso:
    """
    Cierra el lazo con realimentación unitaria negativa: L / (1 + L).
    """
    return RationalSiso.from_control(control.feedback(loop.sys, 1))


def freq_response(tf: RationalSiso, omega: float) -> complex:
    """
    Evalúa la respuesta en frecuencia en s = jω.

    Raises:
        PoleOnAxisError: Si el denominador se anula en jω.
    """
    if omega < 0:
        raise LtiError(f"omega must be >= 0, got {omega}")
    s = 1j * float(omega)
    den = P.polyval(s, tf.den)
    scale = max(abs(c) * abs(s) ** k for k, c in enumerate(tf.den))
    if abs(den) <= 1e-14 * max(scale, 1e-300):
        raise PoleOnAxisError(f"pole on the imaginary axis at omega={omega}")
    return complex(np.squeeze(control.evalfr(tf.sys, s)))


def fastest_time_constant(tf: RationalSiso) -> float:
    """
    Menor constante de tiempo 1/|p| entre los polos no nulos (inf si no hay).
    """
    if tf.order == 0:
        return float("inf")
    mags = np.abs(control.poles(tf.sys))
    mags = mags[mags > 1e-12]
    return float(1.0 / mags.max()) if mags.size else float("inf")


@dataclass
class StateSpaceBlock:
    """
    Realización (A, B, C, D) de un bloque SISO, replicada en `channels`
    canales independientes que comparten matrices. El estado x tiene forma
    (n, channels).
    """
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    channels: int = 1
    x: np.ndarray = None
    steps: int = 0
    _cache: Dict[float, tuple] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(self.n, self.n)
        self.B = np.asarray(self.B, dtype=float).reshape(self.n)
        self.C = np.asarray(self.C, dtype=float).reshape(self.n)
        self.D = float(self.D)
        if self.x is None:
            self.x = np.zeros((self.n, self.channels))

    @property
    def n(self) -> int:
        return int(np.asarray(self.B).size)

    def _discrete(self, dt: float) -> tuple:
        # RK4 sobre un sistema lineal con entrada constante es exactamente
        # el polinomio de Taylor de cuarto orden de exp(hA)
        cached = self._cache.get(dt)
        if cached is not None:
            return cached
        eye = np.eye(self.n)
        hA = dt * self.A
        hA2 = hA @ hA
        hA3 = hA2 @ hA
        phi = eye + hA + hA2 / 2.0 + hA3 / 6.0 + hA3 @ hA / 24.0
        gamma = dt * (eye + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) @ self.B
        self._cache[dt] = (phi, gamma)
        return phi, gamma

    def _inputs(self, u: ArrayLike) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            u = np.full(self.channels, float(u))
        if u.shape != (self.channels,):
            raise LtiError(f"expected {self.channels} inputs, got shape {u.shape}")
        return u

    def step(self, u: ArrayLike, dt: float) -> np.ndarray:
        """
        Avanza un paso RK4 con u retenida y devuelve y = Cx + Du en el
        nuevo estado.
        """
        if dt <= 0:
            raise LtiError(f"dt must be positive, got {dt}")
        u = self._inputs(u)
        if not np.all(np.isfinite(u)):
            raise NonFiniteError(f"non-finite input at step {self.steps}", self.steps)
        if self.n:
            phi, gamma = self._discrete(dt)
            x_new = phi @ self.x + np.outer(gamma, u)
            if not np.all(np.isfinite(x_new)):
                raise NonFiniteError(f"non-finite state at step {self.steps}", self.steps)
            self.x = x_new
        self.steps += 1
        return self.output(u)

    def output(self, u: ArrayLike) -> np.ndarray:
        u = self._inputs(u)
        return self.C @ self.x + self.D * u

    def settle(self, u: ArrayLike) -> np.ndarray:
        """
        Coloca el estado en el equilibrio para entrada constante u
        (x = -A^-1 B u) y devuelve la salida estacionaria.
        """
        u = self._inputs(u)
        if self.n:
            try:
                self.x = -np.linalg.solve(self.A, np.outer(self.B, u))
            except np.linalg.LinAlgError as e:
                raise LtiError(f"block has no equilibrium (singular A): {e}")
        return self.output(u)

    def transfer_at(self, omega: float) -> complex:
        """
        C (jωI − A)^-1 B + D; oráculo de verificación de la realización.
        """
        if not self.n:
            return complex(self.D)
        s = 1j * float(omega)
        return complex(self.C @ np.linalg.solve(s * np.eye(self.n) - self.A, self.B) + self.D)


def _state_space(tf: RationalSiso) -> control.StateSpace:
    if tf.order == 0:
        return control.ss(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[tf.dc_gain]])
    return control.tf2ss(tf.sys, method="scipy")


def realize(tf: RationalSiso, channels: int = 1) -> StateSpaceBlock:
    """
    Realización en forma canónica controlable (control.tf2ss) con estado
    inicial nulo.

    Args:
        tf (RationalSiso): Función de transferencia propia.
        channels (int): Número de copias independientes del bloque.

    Returns:
        StateSpaceBlock: Bloque listo para integrar.
    """
    if tf.order == 0:
        # ganancia estática: sin estados
        return StateSpaceBlock(np.zeros((0, 0)), np.zeros(0), np.zeros(0), tf.dc_gain, channels)
    A, B, C, D = control.ssdata(_state_space(tf))
    return StateSpaceBlock(A, B.ravel(), C.ravel(), float(np.asarray(D).ravel()[0]), channels)


def feedback_block(controller: RationalSiso, plant: RationalSiso, channels: int = 1) -> StateSpaceBlock:
    """
    Interconexión en espacio de estados r -> y del lazo
    e = r − y, u = Gc·e, y = Gp·u con planta estrictamente propia.
    """
    if plant.order == 0 or len(plant.num) == len(plant.den):
        raise ImproperTransferError("plant must be strictly proper for the feedback interconnection")
    loop = control.feedback(control.series(_state_space(controller), _state_space(plant)), 1)
    A, B, C, D = control.ssdata(loop)
    return StateSpaceBlock(A, B.ravel(), C.ravel(), float(np.asarray(D).ravel()[0]), channels)


def step_block(blk: StateSpaceBlock, u: ArrayLike, dt: float):
    """
    Un paso de integración. Devuelve un escalar para entrada escalar en
    bloques de un canal.
    """
    y = blk.step(u, dt)
    if np.ndim(u) == 0 and blk.channels == 1:
        return float(y[0])
    return y


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


def svd6(m: np.ndarray) -> SvdResult:
    """
    SVD M = U·diag(sigma)·Vᵀ con la entrada de mayor módulo de cada columna
    de U no negativa.

    Raises:
        LtiError: Si la matriz no es 6x6 o contiene valores no finitos.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (6, 6):
        raise LtiError(f"expected a 6x6 matrix, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise LtiError("matrix has non-finite entries")
    try:
        U, sigma, Vt = np.linalg.svd(m)
    except np.linalg.LinAlgError as e:
        logging.error(f"Error al descomponer la matriz: {str(e)}")
        raise LtiError(f"svd did not converge: {e}")
    V = Vt.T.copy()
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.where(U[idx, np.arange(6)] < 0.0, -1.0, 1.0)
    return SvdResult(U * signs, sigma, V * signs)
