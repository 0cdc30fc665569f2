# app/core/vision_logic.py
"""
Lógica de Visión
================
Render sintético del par estéreo con los dos marcadores circulares y
recuperación de sus centros con la transformada de Hough para círculos.

Convenciones:
    - Las imágenes son arreglos float (alto, ancho) con intensidad en [0, 1].
    - El píxel (fila i, columna j) tiene coordenadas (x=j, y=i).
    - Los bordes se devuelven como arreglo (N, 2) de pares (x, y).
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import List, Sequence, Tuple

import cv2
import numpy as np
from scipy import ndimage

from .camera_logic import CameraIntrinsics, CameraPose, in_view, project_array, world_to_camera
from ..utils.errors import ConfigurationError, FeatureLossError, MarkerOutOfViewError, VisionError

RING_WIDTH = 1.5
MIN_IMAGE_SIDE = 16
# marcador 1 en la brida, marcador 2 a mitad de la herramienta
DEFAULT_MARKER_RADII = (0.012, 0.008)


@dataclass(frozen=True)
class PixelMap:
    """
    Puente métrico -> píxel de la cámara sintética.

    Attributes:
        width, height (int): Tamaño de la imagen (px).
        f_px (float): Distancia focal en píxeles.
        cx, cy (float): Punto principal (px).
    """
    width: int = 1280
    height: int = 720
    f_px: float = 640.0 / math.tan(math.radians(86.09 / 2))
    cx: float = 640.0
    cy: float = 360.0

    def __post_init__(self):
        if self.f_px <= 0:
            raise ConfigurationError("f_px must be positive")
        if self.width < MIN_IMAGE_SIDE or self.height < MIN_IMAGE_SIDE:
            raise ConfigurationError(f"image must be at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}")

    @classmethod
    def for_intrinsics(cls, intr: CameraIntrinsics, width: int = 1280, height: int = 720) -> "PixelMap":
        f_px = (width / 2) / math.tan(math.radians(intr.fov_w / 2))
        return cls(width, height, f_px, width / 2, height / 2)

    def scaled(self, factor: int) -> "PixelMap":
        """
        Rejilla `factor` veces más fina que cubre el mismo campo de visión.
        """
        if factor < 1:
            raise ConfigurationError(f"pixel scale must be a positive integer, got {factor}")
        if factor == 1:
            return self
        return PixelMap(
            self.width * factor, self.height * factor, self.f_px * factor, self.cx * factor, self.cy * factor
        )

    def fit(self, shape: Tuple[int, int]) -> "PixelMap":
        """
        Rejilla para una imagen (alto, ancho) que es múltiplo entero de esta.
        """
        h, w = shape
        factor = w // self.width
        if factor < 1 or w != factor * self.width or h != factor * self.height:
            raise ConfigurationError(
                f"image {w}x{h} is not an integer multiple of the {self.width}x{self.height} pixel grid"
            )
        return self.scaled(factor)


@dataclass(frozen=True)
class HoughParams:
    """
    Parámetros de la detección.

    Attributes:
        r_min, r_max (int): Rango de radios buscados (px).
        min_votes (int): Votos mínimos absolutos.
        vote_fraction (float): Fracción mínima de los píxeles del círculo
            rasterizado que deben votar.
        edge_threshold (float): Umbral de intensidad de los bordes.
        nms_center (float): Radio de supresión en (a, b) (px).
        nms_radius (int): Radio de supresión en R (px).
        auto_window (bool): Con escena conocida, ajusta la rejilla y la
            ventana de radios a los marcadores proyectados.
        radius_floor (float): Menor radio proyectado aceptado en la rejilla
            ajustada (px).
        max_scale (int): Máximo factor de afinado de la rejilla.
    """
    r_min: int = 3
    r_max: int = 60
    min_votes: int = 8
    vote_fraction: float = 0.5
    edge_threshold: float = 0.5
    nms_center: float = 5.0
    nms_radius: int = 2
    auto_window: bool = True
    radius_floor: float = 5.0
    max_scale: int = 4

    def __post_init__(self):
        if self.r_min < 3:
            raise ConfigurationError("r_min must be at least 3 px")
        if self.r_max < self.r_min:
            raise ConfigurationError("r_max must not be smaller than r_min")
        if not 0 < self.edge_threshold < 1:
            raise ConfigurationError("edge_threshold must lie in (0, 1)")
        if self.radius_floor < 3:
            raise ConfigurationError("radius_floor must be at least 3 px")
        if self.max_scale < 1:
            raise ConfigurationError("max_scale must be at least 1")


@dataclass(frozen=True)
class CircleHypothesis:
    a: float
    b: float
    R: float
    votes: int

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "R": self.R, "votes": self.votes}


def check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if not np.issubdtype(img.dtype, np.floating):
        img = img.astype(float)
    if img.ndim != 2 or min(img.shape) < MIN_IMAGE_SIDE:
        raise VisionError(f"gray image must be 2-D and at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}")
    return img


# ---------------- render ----------------

def draw_ring(img: np.ndarray, x: float, y: float, radius: float, width: float = RING_WIDTH):
    h, w = img.shape
    reach = radius + width + 1
    x0, x1 = max(int(math.floor(x - reach)), 0), min(int(math.ceil(x + reach)) + 1, w)
    y0, y1 = max(int(math.floor(y - reach)), 0), min(int(math.ceil(y + reach)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1]
    d = np.hypot(xs - x, ys - y)
    ring = np.clip(width / 2 + 0.5 - np.abs(d - radius), 0.0, 1.0)
    np.maximum(img[y0:y1, x0:x1], ring, out=img[y0:y1, x0:x1])


def metric_to_pixel(pmap: PixelMap, intr: CameraIntrinsics, u: float, v: float) -> Tuple[float, float]:
    return pmap.cx + u * pmap.f_px / intr.f_u, pmap.cy + v * pmap.f_px / intr.f_v


def pixel_to_metric(pmap: PixelMap, intr: CameraIntrinsics, x: float, y: float) -> Tuple[float, float]:
    return (x - pmap.cx) * intr.f_u / pmap.f_px, (y - pmap.cy) * intr.f_v / pmap.f_px


def render_stereo(
    points_world: Sequence[Sequence[float]],
    radii: Sequence[float],
    pose: CameraPose,
    intr: CameraIntrinsics,
    pmap: PixelMap,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Dibuja cada marcador como un anillo brillante antialias de 1.5 px en
    ambas vistas, con radio proyectado f_px·r/Z.

    Args:
        points_world: Centros de los marcadores en la base (m).
        radii: Radios físicos de los marcadores (m).

    Returns:
        tuple: Imágenes izquierda y derecha.

    Raises:
        MarkerOutOfViewError: Si algún marcador queda fuera de la vista.
    """
    left = np.zeros((pmap.height, pmap.width), dtype=np.float32)
    right = np.zeros((pmap.height, pmap.width), dtype=np.float32)
    for k, (p, r) in enumerate(zip(points_world, radii), start=1):
        pc = world_to_camera(pose, p)
        if not in_view(intr, pc):
            raise MarkerOutOfViewError(f"marker {k} is out of view")
        ul, ur, v = project_array(intr, pc)
        r_px = pmap.f_px * r / pc[2]
        xl, y = metric_to_pixel(pmap, intr, ul, v)
        xr, _ = metric_to_pixel(pmap, intr, ur, v)
        draw_ring(left, xl, y, r_px)
        draw_ring(right, xr, y, r_px)
    return left, right


# ---------------- hough ----------------

def edge_pixels(img: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """
    Píxeles con intensidad >= threshold en orden por filas.
    """
    if not 0 < threshold < 1:
        raise VisionError("threshold must lie in (0, 1)")
    ys, xs = np.nonzero(np.asarray(img) >= threshold)
    return np.stack([xs, ys], axis=1)


@lru_cache(maxsize=None)
def circle_offsets(radius: int) -> np.ndarray:
    """
    Desplazamientos (dx, dy) del círculo rasterizado por punto medio.
    """
    pts = set()
    x, y, err = radius, 0, 1 - radius
    while x >= y:
        for dx, dy in ((x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)):
            pts.add((dx, dy))
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1
    out = np.array(sorted(pts), dtype=np.int64)
    out.setflags(write=False)
    return out


def _accumulate(edges: np.ndarray, radius: int, shape: Tuple[int, int]) -> Tuple[np.ndarray, int]:
    h, w = shape
    off = circle_offsets(radius)
    a = edges[:, 0:1] + off[None, :, 0]
    b = edges[:, 1:2] + off[None, :, 1]
    inside = (a >= 0) & (a < w) & (b >= 0) & (b < h)
    acc = np.bincount((b * w + a)[inside], minlength=h * w).reshape(h, w)
    return acc, len(off)


def _centroid(acc: np.ndarray, a: int, b: int) -> Tuple[float, float]:
    h, w = acc.shape
    y0, y1 = max(b - 1, 0), min(b + 2, h)
    x0, x1 = max(a - 1, 0), min(a + 2, w)
    win = acc[y0:y1, x0:x1].astype(float)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    total = win.sum()
    return float((win * xs).sum() / total), float((win * ys).sum() / total)


def hough_circles(edges: np.ndarray, params: HoughParams, shape: Tuple[int, int]) -> List[CircleHypothesis]:
    """
    Acumulador (a, b, R) con celdas de 1 px votado por círculos
    rasterizados alrededor de cada borde; máximos locales sobre el umbral,
    ordenados por votos y filtrados por supresión de no máximos.

    Args:
        edges (np.ndarray): Bordes (N, 2) como (x, y).
        params (HoughParams): Parámetros de búsqueda.
        shape (tuple): (alto, ancho) de la imagen.

    Returns:
        list[CircleHypothesis]: Hipótesis en orden determinista.
    """
    h, w = shape
    if params.r_max > min(h, w) / 2:
        raise ConfigurationError(f"r_max {params.r_max} exceeds half the image side")
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.shape[0] == 0:
        return []

    # los centros posibles caen a lo sumo r_max fuera de la caja de los bordes
    x0 = max(int(edges[:, 0].min()) - params.r_max, 0)
    y0 = max(int(edges[:, 1].min()) - params.r_max, 0)
    x1 = min(int(edges[:, 0].max()) + params.r_max + 1, w)
    y1 = min(int(edges[:, 1].max()) + params.r_max + 1, h)
    local = edges - np.array([x0, y0])

    candidates = []
    for radius in range(params.r_min, params.r_max + 1):
        acc, n_offsets = _accumulate(local, radius, (y1 - y0, x1 - x0))
        threshold = max(params.min_votes, math.ceil(params.vote_fraction * n_offsets))
        peaks = (acc >= threshold) & (acc == ndimage.maximum_filter(acc, size=3, mode="constant"))
        for b, a in zip(*np.nonzero(peaks)):
            ca, cb = _centroid(acc, int(a), int(b))
            candidates.append((-int(acc[b, a]), radius, int(b) + y0, int(a) + x0, ca + x0, cb + y0))
    candidates.sort(key=lambda c: c[:4])

    kept: List[CircleHypothesis] = []
    for neg_votes, radius, _, _, ca, cb in candidates:
        suppressed = any(
            math.hypot(k.a - ca, k.b - cb) <= params.nms_center and abs(k.R - radius) <= params.nms_radius
            for k in kept
        )
        if not suppressed:
            kept.append(CircleHypothesis(ca, cb, float(radius), -neg_votes))
    return kept


def refine_circle(
    img: np.ndarray,
    hyp: CircleHypothesis,
    band: float = 2.0,
    others: Sequence[CircleHypothesis] = (),
) -> CircleHypothesis:
    """
    Ajuste algebraico de círculo ponderado por intensidad sobre la corona
    |d − R| <= band alrededor de la hipótesis. Los píxeles que caen en la
    corona de otra hipótesis se excluyen (anillos que se cruzan).
    """
    h, w = np.shape(img)
    reach = hyp.R + band + 1
    x0, x1 = max(int(hyp.a - reach), 0), min(int(hyp.a + reach) + 2, w)
    y0, y1 = max(int(hyp.b - reach), 0), min(int(hyp.b + reach) + 2, h)
    ys, xs = np.mgrid[y0:y1, x0:x1]
    win = np.asarray(img[y0:y1, x0:x1], dtype=float)
    mask = (np.abs(np.hypot(xs - hyp.a, ys - hyp.b) - hyp.R) <= band) & (win > 0)
    for other in others:
        mask &= np.abs(np.hypot(xs - other.a, ys - other.b) - other.R) > band
    if mask.sum() < 6:
        return hyp
    x, y, wt = xs[mask].astype(float), ys[mask].astype(float), np.sqrt(win[mask])
    M = np.stack([x, y, np.ones_like(x)], axis=1) * wt[:, None]
    rhs = (x * x + y * y) * wt
    (A, B, C), *_ = np.linalg.lstsq(M, rhs, rcond=None)
    a, b = A / 2, B / 2
    r2 = C + a * a + b * b
    if r2 <= 0 or math.hypot(a - hyp.a, b - hyp.b) > band:
        return hyp
    return CircleHypothesis(float(a), float(b), float(math.sqrt(r2)), hyp.votes)


def detect_markers(img: np.ndarray, params: HoughParams) -> List[CircleHypothesis]:
    """
    Hough + refinamiento; las hipótesis concéntricas (centros a menos de
    nms_center) se funden quedando la de más votos.
    """
    img = check_image(img)
    hyps = hough_circles(edge_pixels(img, params.edge_threshold), params, img.shape)
    merged: List[CircleHypothesis] = []
    for hyp in hyps:
        if all(math.hypot(m.a - hyp.a, m.b - hyp.b) > params.nms_center for m in merged):
            merged.append(hyp)
    return [refine_circle(img, hyp, others=[m for m in merged if m is not hyp]) for hyp in merged]


def _pair(left: List[CircleHypothesis], right: List[CircleHypothesis], max_dy: float):
    best, best_cost = None, math.inf
    for order in ((0, 1), (1, 0)):
        pairs = [(left[0], right[order[0]]), (left[1], right[order[1]])]
        if any(abs(l.b - r.b) >= max_dy for l, r in pairs):
            continue
        cost = sum(abs(l.b - r.b) + abs(l.R - r.R) for l, r in pairs)
        if cost < best_cost:
            best, best_cost = pairs, cost
    return best


def extract_feature_vector(
    left: np.ndarray,
    right: np.ndarray,
    params: HoughParams,
    pmap: PixelMap,
    intr: CameraIntrinsics,
    max_dy: float = 3.0,
) -> np.ndarray:
    """
    Detecta los dos marcadores en cada vista, los empareja por la línea
    epipolar y devuelve [ul1, ur1, v1, ul2, ur2, v2] en mm. El marcador 1 es
    el de mayor radio proyectado.

    Raises:
        FeatureLossError: Si no hay exactamente dos círculos por imagen, el
            emparejamiento falla o la disparidad no es positiva.
    """
    found_l = detect_markers(left, params)
    found_r = detect_markers(right, params)
    if len(found_l) != 2 or len(found_r) != 2:
        raise FeatureLossError(f"expected 2 circles per view, found {len(found_l)} left and {len(found_r)} right")
    pairs = _pair(found_l, found_r, max_dy)
    if pairs is None:
        raise FeatureLossError("epipolar pairing failed")
    pairs.sort(key=lambda p: -(p[0].R + p[1].R))
    features = []
    for k, (l, r) in enumerate(pairs, start=1):
        ul, v_l = pixel_to_metric(pmap, intr, l.a, l.b)
        ur, v_r = pixel_to_metric(pmap, intr, r.a, r.b)
        if not ur > ul:
            raise FeatureLossError(f"non-positive disparity for marker {k}")
        features.extend([ul, ur, 0.5 * (v_l + v_r)])
    return np.array(features)


def plan_detection(
    points_world: Sequence[Sequence[float]],
    radii: Sequence[float],
    pose: CameraPose,
    intr: CameraIntrinsics,
    pmap: PixelMap,
    params: HoughParams,
) -> Tuple[PixelMap, HoughParams]:
    """
    Rejilla y ventana de radios para detectar los marcadores de una escena
    conocida.

    Con params.auto_window la rejilla se afina por el menor factor entero
    que lleva el menor radio proyectado a radius_floor y separa los centros
    más de dos radios de supresión; la ventana [r_min, r_max] abarca los
    radios proyectados con un 20% de holgura. Sin auto_window se devuelven
    pmap y params sin cambios.

    Raises:
        MarkerOutOfViewError: Si algún marcador queda fuera de la vista.
        FeatureLossError: Si un anillo se corta con el borde de la imagen o
            los marcadores no se resuelven dentro de max_scale.
    """
    pts = np.asarray(points_world, dtype=float).reshape(-1, 3)
    radii = np.asarray(radii, dtype=float).reshape(-1)
    pc = world_to_camera(pose, pts)
    for k, p in enumerate(pc, start=1):
        if not in_view(intr, p):
            raise MarkerOutOfViewError(f"marker {k} is out of view")
    if not params.auto_window or len(pts) == 0:
        return pmap, params

    img = project_array(intr, pc)
    r_px = pmap.f_px * radii / pc[:, 2]
    views = [
        np.stack(metric_to_pixel(pmap, intr, img[:, col], img[:, 2]), axis=1) for col in (0, 1)
    ]
    reach = r_px + RING_WIDTH
    for centers in views:
        low = centers - reach[:, None]
        high = centers + reach[:, None]
        cut = (low[:, 0] < 0) | (low[:, 1] < 0) | (high[:, 0] > pmap.width - 1) | (high[:, 1] > pmap.height - 1)
        if cut.any():
            raise FeatureLossError(f"marker {int(np.flatnonzero(cut)[0]) + 1} ring is cut by the image border")

    needed = params.radius_floor / float(r_px.min())
    if len(pts) > 1:
        gaps = [
            np.linalg.norm(c[i] - c[j])
            for c in views
            for i in range(len(pts))
            for j in range(i + 1, len(pts))
        ]
        gap = float(min(gaps))
        needed = max(needed, 2.0 * params.nms_center / gap if gap > 0 else math.inf)
    scale = max(1, math.ceil(needed - 1e-9))
    if scale > params.max_scale:
        raise FeatureLossError(
            f"markers not resolvable: smallest radius {float(r_px.min()):.2f} px needs scale {scale} > {params.max_scale}"
        )
    grid = pmap.scaled(scale)
    r_lo = max(3, int(math.floor(0.8 * scale * float(r_px.min()))))
    r_hi = min(int(math.ceil(1.2 * scale * float(r_px.max()))) + 1, min(grid.width, grid.height) // 2)
    if r_hi < r_lo:
        raise FeatureLossError(f"projected markers do not fit the image ({float(r_px.max()):.1f} px)")
    logging.debug(f"Visión: escala {scale}, radios [{r_lo}, {r_hi}] px")
    return grid, replace(params, r_min=r_lo, r_max=r_hi)


def observe_features(
    points_world: Sequence[Sequence[float]],
    radii: Sequence[float],
    pose: CameraPose,
    intr: CameraIntrinsics,
    pmap: PixelMap,
    params: HoughParams,
) -> np.ndarray:
    """
    Camino completo de visión: planificación de la rejilla, render del par
    y extracción por Hough.
    """
    grid, tuned = plan_detection(points_world, radii, pose, intr, pmap, params)
    left, right = render_stereo(points_world, radii, pose, intr, grid)
    return extract_feature_vector(left, right, tuned, grid, intr)


# ---------------- PGM ----------------

def write_pgm(path, img: np.ndarray) -> Path:
    """
    Guarda la imagen como PGM binario (P5, maxval 255).
    """
    path = Path(path)
    data = np.round(np.clip(np.asarray(img, dtype=float), 0.0, 1.0) * 255.0).astype(np.uint8)
    if not cv2.imwrite(str(path), data):
        logging.error(f"Error al escribir la imagen {path}")
        raise OSError(f"could not write image {path}")
    return path


def read_pgm(path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        logging.error(f"Error al leer la imagen {path}")
        raise OSError(f"could not read image {path}")
    if img.ndim != 2:
        raise VisionError(f"{path} is not a gray image")
    return check_image(img.astype(float) / float(np.iinfo(img.dtype).max))
