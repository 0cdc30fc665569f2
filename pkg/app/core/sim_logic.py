# app/core/sim_logic.py
"""
Lógica de Simulación
====================
Ejecución en lazo cerrado de un escenario, los tres escenarios de
alineación incorporados, el cálculo de métricas y el barrido de robustez
sobre L2 / L4.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .camera_logic import in_view, world_to_camera
from .controller_logic import (
    FeedforwardBlock,
    InnerLoopModel,
    Mode,
    SupervisorState,
    design_outer_bank,
    feedforward_filter,
    inner_closed_loop,
    outer_controller,
    select_features,
    step_outer,
)
from .kinematics_logic import (
    Elbow,
    Shoulder,
    forward_kinematics,
    rotation_angle,
    solve_nearest,
)
from .lti_logic import fastest_time_constant
from .servo_logic import (
    ServoPlant,
    estimate_features,
    features_of_joints,
    inverse_features,
    jacobian,
    marker_points,
)
from .vision_logic import observe_features
from ..models import Metrics, PoseModel, ScenarioConfig, StartModel, DisturbanceModel, SweepRow
from ..utils.errors import (
    CameraError,
    ConfigurationError,
    KinematicsError,
    ServoModelError,
    SimulationAbortError,
    VisionError,
    WorkbenchError,
)

SETTLING_BAND = 0.02
STEADY_WINDOW = 0.10
DT_RATIO = 0.2

TARGET_POSE = PoseModel(
    position=[-1.0, 0.2, 0.3],
    rotation=[[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]],
)
SCENARIO1_START = PoseModel(
    position=[1.404, 0.228, 1.171],
    rotation=[
        [-0.4893, -0.0262, 0.8717],
        [0.2427, 0.9560, 0.1650],
        [-0.8377, 0.2932, -0.4614],
    ],
)
SCENARIO2_START = PoseModel(
    position=[1.285, 0.0, 1.57],
    rotation=[[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]],
)
SCENARIO_DISTURBANCE_DEG = [0.1, 0.5, 0.2, 0.3, -0.1, 0.3]


@dataclass
class TrajectoryLog:
    """
    Registro por muestra de control. Todas las matrices tienen una fila por
    muestra, t = k·dt_ctrl.
    """
    t: np.ndarray
    q_ref: np.ndarray
    q_T: np.ndarray
    q_bar: np.ndarray
    position: np.ndarray
    rotation: np.ndarray
    measured: np.ndarray
    estimated: np.ndarray
    used: np.ndarray
    mode: List[str]
    active_channels: np.ndarray
    sigma: np.ndarray
    # ángulo entre la orientación real y la de las articulaciones sin perturbar
    excursion: np.ndarray

    @classmethod
    def allocate(cls, rows: int) -> "TrajectoryLog":
        def nan6():
            return np.full((rows, 6), np.nan)

        return cls(
            t=np.zeros(rows), q_ref=nan6(), q_T=nan6(), q_bar=nan6(),
            position=np.zeros((rows, 3)), rotation=np.zeros((rows, 3, 3)),
            measured=nan6(), estimated=nan6(), used=nan6(),
            mode=[""] * rows, active_channels=np.zeros(rows, dtype=int), sigma=nan6(),
            excursion=np.zeros(rows),
        )

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class ScenarioSetup:
    """
    Elementos derivados de la configuración antes de iterar.
    """
    true_plant: ServoPlant
    model_plant: ServoPlant
    q_start: np.ndarray
    q_ff_target: np.ndarray
    p_target: np.ndarray
    target: np.ndarray
    d_qT: np.ndarray
    hough: Optional[tuple] = field(default=None)


def _check_step_sizes(cfg: ScenarioConfig):
    ctl = cfg.controller
    fastest_sim = min(
        fastest_time_constant(inner_closed_loop(ctl.tau_in)),
        fastest_time_constant(feedforward_filter(ctl.tau_in, ctl.resolved_tau_forward)),
    )
    if cfg.dt_sim > DT_RATIO * fastest_sim:
        raise ConfigurationError(
            f"dt_sim {cfg.dt_sim} exceeds {DT_RATIO} x the fastest time constant {fastest_sim:.6g} s"
        )
    fastest_ctrl = fastest_time_constant(outer_controller(1.0, ctl.omega_n, ctl.zeta, ctl.tau_in))
    if cfg.dt_ctrl > DT_RATIO * fastest_ctrl:
        raise ConfigurationError(
            f"dt_ctrl {cfg.dt_ctrl} exceeds {DT_RATIO} x the fastest controller time constant {fastest_ctrl:.6g} s"
        )


def start_joints(cfg: ScenarioConfig) -> np.ndarray:
    """
    Articulaciones iniciales: rama elbow_up con el hombro hacia la pose
    inicial (geometría real) y la muñeca más cercana a la configuración cero.
    """
    if cfg.start.joints_deg is not None:
        return np.radians(cfg.start.joints_deg)
    geom = cfg.true_geometry.to_geometry()
    return solve_nearest(
        geom, cfg.start.pose.to_transform(), np.zeros(6), elbows=(Elbow.UP,), shoulders=(Shoulder.FRONT,)
    ).q


def prepare(cfg: ScenarioConfig) -> ScenarioSetup:
    """
    Construye plantas, articulaciones inicial/objetivo y p̄ = F(IK(objetivo)).
    """
    _check_step_sizes(cfg)
    intr = cfg.camera.to_intrinsics()
    pose = cfg.camera.to_pose()
    true_plant = ServoPlant(cfg.true_geometry.to_geometry(), intr, pose)
    model_plant = ServoPlant(cfg.model_geometry.to_geometry(), intr, pose)
    q_start = start_joints(cfg)
    target = cfg.target.to_transform()
    q_ff_target = solve_nearest(
        model_plant.geometry, target, q_start, unwrap=True, shoulders=(Shoulder.FRONT,)
    ).q
    p_target = features_of_joints(model_plant, q_ff_target)[0]
    hough = None
    if cfg.vision.mode == "hough":
        hough = (cfg.vision.marker_radii, cfg.vision.to_pixel_map(intr), cfg.vision.to_hough())
    return ScenarioSetup(
        true_plant=true_plant,
        model_plant=model_plant,
        q_start=q_start,
        q_ff_target=q_ff_target,
        p_target=p_target,
        target=target,
        d_qT=cfg.disturbance.d_qT,
        hough=hough,
    )


def _measure(setup: ScenarioSetup, q_bar: np.ndarray) -> Tuple[Optional[np.ndarray], Tuple[bool, bool]]:
    feats, flags = features_of_joints(setup.true_plant, q_bar)
    if setup.hough is None or not all(flags):
        return feats, flags
    radii, pmap, params = setup.hough
    plant = setup.true_plant
    try:
        return observe_features(marker_points(plant, q_bar), radii, plant.pose, plant.intr, pmap, params), flags
    except VisionError as e:
        logging.info(f"Visión: pérdida de características ({str(e)})")
        return None, (False, False)


def run_scenario(cfg: ScenarioConfig) -> Tuple[TrajectoryLog, Metrics]:
    """
    Ejecuta el lazo cerrado completo de un escenario.

    Args:
        cfg (ScenarioConfig): Escenario validado.

    Returns:
        tuple: (TrajectoryLog, Metrics).

    Raises:
        ConfigurationError: Si los pasos de integración son demasiado grandes.
        SimulationAbortError: Si algún módulo falla durante el lazo.
    """
    ctl = cfg.controller
    setup = prepare(cfg)
    dt_ctrl, dt_sim, n_sub = cfg.dt_ctrl, cfg.dt_sim, cfg.substeps
    rows = cfg.samples + 1
    log = TrajectoryLog.allocate(rows)
    logging.info(f"Escenario {cfg.name}: inicio ({rows} muestras, visión {cfg.vision.mode})")

    inner = InnerLoopModel(ctl.tau_in, ctl.inner_plant, ctl.inner_variant)
    q_T = inner.settle(setup.q_start)
    ff_goal = setup.q_ff_target if ctl.feedforward_enabled else setup.q_start
    ff = FeedforwardBlock(ctl.tau_in, setup.q_start, ff_goal, ctl.resolved_tau_forward)

    zero = np.zeros(6)
    d0 = setup.d_qT if cfg.disturbance.onset <= 0.0 else zero
    _, flags0 = features_of_joints(setup.true_plant, q_T + d0)
    sup = SupervisorState(
        intr=setup.true_plant.intr,
        mode=Mode.MEASURED if all(flags0) else Mode.ESTIMATED,
        hysteresis_margin=ctl.hysteresis_margin,
    )
    bank = None
    q_tilde = q_T.copy()

    for k in range(rows):
        t = k * dt_ctrl
        d = setup.d_qT if t >= cfg.disturbance.onset else zero
        q_bar = q_T + d
        try:
            measured, flags = _measure(setup, q_bar)
            estimated = estimate_features(setup.model_plant, q_T)
            used, mode = select_features(sup, measured, flags, estimated)

            if mode == Mode.MEASURED and ctl.linearization_point == "estimated":
                try:
                    q_tilde = inverse_features(setup.model_plant, used, q_tilde)
                except (KinematicsError, ServoModelError, CameraError) as e:
                    logging.warning(f"Muestra {k}: F^-1 falló ({str(e)}); se linealiza en q_T")
                    q_tilde = q_T.copy()
            else:
                q_tilde = q_T.copy()

            stride = ctl.adaptation_stride
            if bank is None or (stride > 0 and k % stride == 0):
                lin = jacobian(setup.model_plant, q_tilde)
                bank = design_outer_bank(lin, ctl.omega_n, ctl.zeta, ctl.tau_in, ctl.sigma_tol, prev=bank)

            e = setup.p_target - used
            u_fb = step_outer(bank, e, dt_ctrl) if ctl.feedback_enabled else zero
            q_ref = ff.output + u_fb

            T = forward_kinematics(setup.true_plant.geometry, q_bar)
            T_cmd = T if not d.any() else forward_kinematics(setup.true_plant.geometry, q_T)
            log.t[k] = t
            log.q_ref[k], log.q_T[k], log.q_bar[k] = q_ref, q_T, q_bar
            log.position[k], log.rotation[k] = T[:3, 3], T[:3, :3]
            log.excursion[k] = rotation_angle(T[:3, :3], T_cmd[:3, :3])
            if measured is not None:
                log.measured[k] = measured
            log.estimated[k], log.used[k] = estimated, used
            log.mode[k] = mode.value
            log.active_channels[k] = bank.active_count
            log.sigma[k] = bank.sigma

            if k == rows - 1:
                break
            for _ in range(n_sub):
                q_T, _ = inner.step(ff.output + u_fb, d, dt_sim)
                ff.step(dt_sim)
        except SimulationAbortError:
            raise
        except (WorkbenchError, FloatingPointError, np.linalg.LinAlgError) as e:
            logging.exception(f"Error al simular el escenario {cfg.name} en la muestra {k}")
            raise SimulationAbortError(k, e)

    metrics = compute_metrics(log, setup.target, dt_ctrl)
    logging.info(
        f"Escenario {cfg.name}: fin, asentamiento={metrics.settling_time}, "
        f"error final={metrics.final_position_error:.3g} m"
    )
    return log, metrics


def compute_metrics(log: TrajectoryLog, target: np.ndarray, dt_ctrl: Optional[float] = None) -> Metrics:
    """
    Métricas de desempeño a partir del registro.

    Args:
        log (TrajectoryLog): Registro no vacío.
        target (np.ndarray): Pose objetivo 4x4.
        dt_ctrl (float, opcional): Periodo de control; por omisión se deduce
            de t.
    """
    if len(log) == 0:
        raise ConfigurationError("empty trajectory log")
    t = log.t
    if dt_ctrl is None:
        dt_ctrl = float(t[1] - t[0]) if len(t) > 1 else 0.0
    err = log.position - target[:3, 3]
    norm = np.linalg.norm(err, axis=1)
    e0 = norm[0]

    if e0 == 0.0:
        violations = np.flatnonzero(norm > 0.0)
    else:
        violations = np.flatnonzero(norm >= SETTLING_BAND * e0)
    if violations.size == 0:
        settling: Optional[float] = float(t[0])
    elif violations[-1] == len(t) - 1:
        settling = None
    else:
        settling = float(t[violations[-1] + 1])

    span = t[-1] - t[0]
    window = t >= t[-1] - STEADY_WINDOW * span - 1e-12
    steady = np.mean(np.abs(err[window]), axis=0)

    direction = np.sign(-err[0])
    beyond = np.max(direction * err, axis=0)
    overshoot = np.where(direction != 0, np.maximum(beyond, 0.0), 0.0)
    overshoot = overshoot / e0 * 100.0 if e0 > 0 else np.zeros(3)

    angles = np.array([rotation_angle(R, target[:3, :3]) for R in log.rotation])
    modes = log.mode
    transitions = sum(1 for a, b in zip(modes, modes[1:]) if a != b)
    return Metrics(
        settling_time=settling,
        settled=settling is not None,
        steady_state_error=[float(v) for v in steady],
        overshoot=[float(v) for v in overshoot],
        time_in_estimated_mode=float(sum(1 for m in modes if m == Mode.ESTIMATED.value) * dt_ctrl),
        final_position_error=float(norm[-1]),
        max_orientation_error=float(angles.max()),
        max_orientation_excursion=float(np.max(log.excursion)),
        final_orientation_error=float(angles[-1]),
        mode_transitions=int(transitions),
    )


def start_in_view(cfg: ScenarioConfig) -> bool:
    """
    True si ambos marcadores de la configuración inicial son visibles.
    """
    plant = ServoPlant(cfg.true_geometry.to_geometry(), cfg.camera.to_intrinsics(), cfg.camera.to_pose())
    return all(features_of_joints(plant, start_joints(cfg))[1])


def target_in_view(cfg: ScenarioConfig) -> bool:
    intr, pose = cfg.camera.to_intrinsics(), cfg.camera.to_pose()
    T = cfg.target.to_transform()
    geom = cfg.model_geometry.to_geometry()
    points = [T[:3, 3], T[:3, 3] + 0.5 * geom.L_tool * T[:3, 2]]
    return all(in_view(intr, world_to_camera(pose, p)) for p in points)


def builtin_scenarios() -> List[ScenarioConfig]:
    """
    Los tres escenarios de alineación: (1) dentro de la vista con
    perturbación, (2) fuera de la vista sin perturbación, (3) fuera de la
    vista con perturbación. Todos comparten la pose objetivo.

    Raises:
        ConfigurationError: Si la cámara por omisión no reproduce la
            visibilidad esperada de cada escenario.
    """
    disturbed = DisturbanceModel(d_qT_deg=list(SCENARIO_DISTURBANCE_DEG))
    scenarios = [
        ScenarioConfig(name="1", start=StartModel(pose=SCENARIO1_START), target=TARGET_POSE, disturbance=disturbed),
        ScenarioConfig(name="2", start=StartModel(pose=SCENARIO2_START), target=TARGET_POSE),
        ScenarioConfig(name="3", start=StartModel(pose=SCENARIO2_START), target=TARGET_POSE, disturbance=disturbed),
    ]
    expected = (True, False, False)
    for cfg, visible in zip(scenarios, expected):
        if start_in_view(cfg) != visible:
            raise ConfigurationError(f"scenario {cfg.name}: start visibility differs from the expected {visible}")
        if not target_in_view(cfg):
            raise ConfigurationError(f"scenario {cfg.name}: target pose is out of view")
    return scenarios


def get_scenario(name: str) -> ScenarioConfig:
    for cfg in builtin_scenarios():
        if cfg.name == str(name):
            return cfg
    raise ConfigurationError(f"unknown built-in scenario {name}")


# ---------------- barrido de robustez ----------------

def sweep_fractions(start: float, stop: float, step: float) -> List[float]:
    if step <= 0 or stop < start:
        raise ConfigurationError("sweep range needs step > 0 and to >= from")
    return [float(f) for f in np.round(np.arange(start, stop + step / 2, step), 10)]


def _sweep_point(args: Tuple[str, str, float]) -> dict:
    cfg_json, param, fraction = args
    base = ScenarioConfig.model_validate_json(cfg_json)
    try:
        nominal = base.model_geometry.to_geometry().scaled(param, fraction)
        true_geom = base.true_geometry.model_copy(update={param: getattr(nominal, param)})
        cfg = base.model_copy(update={"true_geometry": true_geom, "name": f"{base.name}-{param}-{fraction:g}"})
        _, metrics = run_scenario(cfg)
        err_x = metrics.steady_state_error[0]
        target_x = abs(base.target.position[0])
        return SweepRow(
            param=param,
            fraction=fraction,
            error_pct=err_x / target_x * 100.0 if target_x > 0 else None,
            steady_state_error_x=err_x,
            settling_time=metrics.settling_time,
        ).model_dump()
    except WorkbenchError as e:
        logging.error(f"Error en el punto del barrido {param}={fraction}: {str(e)}")
        return SweepRow(param=param, fraction=fraction, status="error", error=str(e)).model_dump()


def robustness_sweep(
    base: ScenarioConfig,
    param: str,
    fractions: Sequence[float],
    workers: int = 1,
) -> List[SweepRow]:
    """
    Escala un eslabón de la geometría REAL manteniendo el modelo nominal y
    reporta el error estacionario en X como % de |X objetivo|.

    Args:
        base (ScenarioConfig): Escenario base (escenario 1).
        param (str): "L2" o "L4".
        fractions (list[float]): Fracciones del valor nominal.
        workers (int): Procesos en paralelo (1 = secuencial).

    Returns:
        list[SweepRow]: Una fila por fracción, en el orden dado.
    """
    if param not in ("L2", "L4"):
        raise ConfigurationError(f"sweep parameter must be L2 or L4, got {param}")
    if any(not (math.isfinite(f) and f > 0) for f in fractions):
        raise ConfigurationError("sweep fractions must be positive")
    cfg_json = base.model_dump_json()
    jobs = [(cfg_json, param, float(f)) for f in fractions]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]
    return [SweepRow(**row) for row in results]
