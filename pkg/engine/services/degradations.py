# engine/services/degradations.py
# -*- coding: utf-8 -*-

"""
Los siete operadores de degradación D_k(o; ι, ξ).

Todos trabajan en el espacio de 8 bits y cuantizan al final. La aleatoriedad
ξ sale siempre de un RngStream explícito, con un número fijo de extracciones
por operador (ver `expected_draws`):
    rain           4 por gota (x, y, longitud, ángulo)
    snow           4 por copo (x, y, radio, brillo)
    motion_blur    1 (ángulo)
    gaussian_noise H·W·3
    low_light      H·W·3
    haze, jpeg     0
"""

import io
import logging
import math
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
from PIL import Image

from engine.core.config import DegradationConfig
from engine.core.errors import ImageIOError, ImageValidationError
from engine.core.image import Image8, Kernel2D, Mask, convolve, correlate_plane, quantize
from engine.core.modes import CorruptionMode
from engine.core.rng import RngStream

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = DegradationConfig()

# Paso de muestreo (px) al rasterizar líneas con antialiasing.
_LINE_STEP = 0.25
# Margen para que floor(500·0.6) no caiga a 299 por representación binaria.
_COUNT_EPS = 1e-9
_MASK_KERNEL_SIZE = 3


def check_severity(iota: float) -> float:
    iota = float(iota)
    if not (0.0 <= iota <= 1.0):
        raise ImageValidationError(f"Severidad fuera de [0,1]: {iota}")
    return iota


# --- Fórmulas ---
def streak_count(iota: float, cfg: DegradationConfig = DEFAULT_CONFIG) -> int:
    return int(math.floor(cfg.rain.streak_factor * check_severity(iota) + _COUNT_EPS))


def flake_count(iota: float, cfg: DegradationConfig = DEFAULT_CONFIG) -> int:
    return int(math.floor(cfg.snow.flake_factor * check_severity(iota) + _COUNT_EPS))


def haze_alpha(iota: float, cfg: DegradationConfig = DEFAULT_CONFIG) -> float:
    return cfg.haze.alpha_scale * check_severity(iota)


def haze_profile(height: int) -> np.ndarray:
    """ρ(y) = (y/H)^{1/2} para y = 0..H-1 (ρ < 1 en la última fila)."""
    return np.sqrt(np.arange(height, dtype=np.float64) / float(height))


def motion_blur_length(iota: float, cfg: DegradationConfig = DEFAULT_CONFIG) -> int:
    """ℓ = ℓ_min + ι(ℓ_max − ℓ_min) llevado al impar más cercano (empates hacia arriba), mínimo 3."""
    mb = cfg.motion_blur
    raw = mb.length_min + check_severity(iota) * (mb.length_max - mb.length_min)
    return max(3, 2 * int(math.floor(raw / 2.0)) + 1)


def noise_sigma(iota: float, cfg: DegradationConfig = DEFAULT_CONFIG) -> float:
    return check_severity(iota) * cfg.gaussian_noise.sigma_max


def brightness_factor(iota: float, cfg: DegradationConfig = DEFAULT_CONFIG) -> float:
    """ν = 1 − ι(1 − ν_min)."""
    return 1.0 - check_severity(iota) * (1.0 - cfg.low_light.nu_min)


def low_light_sigma(iota: float, cfg: DegradationConfig = DEFAULT_CONFIG) -> float:
    return check_severity(iota) * cfg.low_light.sigma


def jpeg_quality(iota: float, cfg: DegradationConfig = DEFAULT_CONFIG) -> int:
    """q = round(q_max − ι(q_max − q_min))."""
    jq = cfg.jpeg
    return int(round(jq.quality_max - check_severity(iota) * (jq.quality_max - jq.quality_min)))


def expected_draws(
    mode: CorruptionMode,
    shape: Tuple[int, int],
    iota: float,
    cfg: DegradationConfig = DEFAULT_CONFIG,
) -> int:
    """Extracciones de 64 bits que consume `apply` para (modo, forma, ι)."""
    mode = CorruptionMode.from_name(mode)
    h, w = shape
    if mode is CorruptionMode.RAIN:
        return 4 * streak_count(iota, cfg)
    if mode is CorruptionMode.SNOW:
        return 4 * flake_count(iota, cfg)
    if mode is CorruptionMode.MOTION_BLUR:
        return 1
    if mode in (CorruptionMode.GAUSSIAN_NOISE, CorruptionMode.LOW_LIGHT):
        return h * w * 3
    return 0


# --- Helpers de rasterizado ---
def alpha_blend(o: Image8, weight: np.ndarray, color: Sequence[int]) -> Image8:
    """(1 − w)⊙o + w⊙c con w de forma (H, W) difundida a los canales."""
    w = np.asarray(weight, dtype=np.float64)[..., None]
    c = np.asarray(color, dtype=np.float64)
    return Image8(quantize((1.0 - w) * o.to_float() + w * c))


def _splat(plane: np.ndarray, xs: np.ndarray, ys: np.ndarray, weights: np.ndarray) -> None:
    """Deposita pesos con interpolación bilineal (coordenadas x=columna, y=fila)."""
    h, w = plane.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    corners = (
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    )
    for dx, dy, frac in corners:
        xi = x0 + dx
        yi = y0 + dy
        ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        np.add.at(plane, (yi[ok], xi[ok]), (weights * frac)[ok])


def _smooth_mask(plane: np.ndarray, cfg: DegradationConfig) -> Mask:
    kernel = Kernel2D.gaussian(_MASK_KERNEL_SIZE, cfg.mask_blur_sigma)
    smoothed = correlate_plane(plane, kernel.weights)
    return Mask(np.clip(smoothed, 0.0, 1.0))


# --- Lluvia y nieve ---
def rain_mask(
    shape: Tuple[int, int],
    iota: float,
    rng: RngStream,
    cfg: DegradationConfig = DEFAULT_CONFIG,
) -> Mask:
    """Máscara de lluvia M ∈ [0,1]: N_r trazos casi verticales con antialiasing, suavizados."""
    h, w = shape
    rc = cfg.rain
    n = streak_count(iota, cfg)
    plane = np.zeros((h, w), dtype=np.float64)
    if n == 0:
        return Mask(plane)
    u = rng.uniforms(4 * n).reshape(n, 4)
    x0 = u[:, 0] * w
    y0 = u[:, 1] * h
    length = rc.length_min + u[:, 2] * (rc.length_max - rc.length_min)
    angle = np.deg2rad(rc.angle_min_deg + u[:, 3] * (rc.angle_max_deg - rc.angle_min_deg))

    n_samples = int(math.ceil(rc.length_max / _LINE_STEP)) + 1
    t = np.arange(n_samples, dtype=np.float64) * _LINE_STEP
    inside = t[None, :] <= length[:, None]
    xs = x0[:, None] + t[None, :] * np.cos(angle)[:, None]
    ys = y0[:, None] + t[None, :] * np.sin(angle)[:, None]
    _splat(plane, xs[inside], ys[inside], np.full(int(inside.sum()), _LINE_STEP))
    np.clip(plane, 0.0, 1.0, out=plane)
    logger.debug(f"Lluvia: {n} trazos, {4 * n} extracciones")
    return _smooth_mask(plane, cfg)


def snow_mask(
    shape: Tuple[int, int],
    iota: float,
    rng: RngStream,
    cfg: DegradationConfig = DEFAULT_CONFIG,
) -> Mask:
    """Máscara de nieve: N_s discos de radio en {1,2} con valor brillo/255 (máximo), suavizados."""
    h, w = shape
    sc = cfg.snow
    n = flake_count(iota, cfg)
    plane = np.zeros((h, w), dtype=np.float64)
    if n == 0:
        return Mask(plane)
    u = rng.uniforms(4 * n).reshape(n, 4)
    cx = np.floor(u[:, 0] * w).astype(np.int64)
    cy = np.floor(u[:, 1] * h).astype(np.int64)
    radii = np.asarray(sc.radii, dtype=np.int64)
    radius = radii[np.minimum((u[:, 2] * len(radii)).astype(np.int64), len(radii) - 1)]
    value = (sc.brightness_min + u[:, 3] * (sc.brightness_max - sc.brightness_min)) / 255.0

    r_max = int(radii.max())
    dy, dx = np.mgrid[-r_max:r_max + 1, -r_max:r_max + 1]
    dx = dx.ravel()
    dy = dy.ravel()
    inside = (dx[None, :] ** 2 + dy[None, :] ** 2) <= (radius[:, None] ** 2)
    xx = cx[:, None] + dx[None, :]
    yy = cy[:, None] + dy[None, :]
    vv = np.broadcast_to(value[:, None], inside.shape)
    ok = inside & (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
    np.maximum.at(plane, (yy[ok], xx[ok]), vv[ok])
    logger.debug(f"Nieve: {n} copos, {4 * n} extracciones")
    return _smooth_mask(plane, cfg)


def rain(o: Image8, iota: float, rng: RngStream, cfg: DegradationConfig = DEFAULT_CONFIG) -> Image8:
    """x = (1 − γM)⊙o + γM⊙c_w con γ = 0.3."""
    m = rain_mask(o.shape, iota, rng, cfg)
    return alpha_blend(o, cfg.rain.opacity * m.data, cfg.rain.color)


def snow(o: Image8, iota: float, rng: RngStream, cfg: DegradationConfig = DEFAULT_CONFIG) -> Image8:
    """Misma mezcla que la lluvia, con γ = 0.5."""
    m = snow_mask(o.shape, iota, rng, cfg)
    return alpha_blend(o, cfg.snow.opacity * m.data, cfg.snow.color)


# --- Neblina ---
def haze(o: Image8, iota: float, cfg: DegradationConfig = DEFAULT_CONFIG) -> Image8:
    """Dispersión atmosférica con perfil vertical; determinista."""
    alpha = haze_alpha(iota, cfg)
    weight = alpha * haze_profile(o.height)[:, None] * np.ones((1, o.width))
    return alpha_blend(o, weight, cfg.haze.color)


# --- Desenfoque de movimiento ---
def motion_blur_kernel(theta: float, length: int) -> Kernel2D:
    """Kernel lineal normalizado de tamaño ℓ×ℓ que pasa por el centro con ángulo θ."""
    if length < 1 or length % 2 == 0:
        raise ImageValidationError(f"La longitud del kernel debe ser impar: {length}")
    center = (length - 1) / 2.0
    t = np.linspace(-center, center, 4 * length + 1)
    xs = center + t * math.cos(theta)
    ys = center + t * math.sin(theta)
    weights = np.zeros((length, length), dtype=np.float64)
    _splat(weights, xs, ys, np.ones_like(t))
    return Kernel2D(weights / weights.sum())


def max_kernel_length(shape: Tuple[int, int]) -> int:
    """Mayor impar ≤ min(H, W); con 1 el kernel es la identidad."""
    side = min(shape)
    return side if side % 2 else side - 1


def motion_blur(o: Image8, iota: float, rng: RngStream, cfg: DegradationConfig = DEFAULT_CONFIG) -> Image8:
    """
    Kernel lineal de longitud ℓ y ángulo θ ~ U[0, 2π). En cuadros más pequeños
    que ℓ la longitud se limita al mayor impar ≤ min(H, W); θ se extrae igual.
    """
    theta = rng.uniform(0.0, 2.0 * math.pi)
    length = min(motion_blur_length(iota, cfg), max_kernel_length(o.shape))
    logger.debug(f"Motion blur: θ={theta:.4f} rad, ℓ={length}")
    return convolve(o, motion_blur_kernel(theta, length))


# --- Ruido ---
def gaussian_noise(o: Image8, iota: float, rng: RngStream, cfg: DegradationConfig = DEFAULT_CONFIG) -> Image8:
    sigma = noise_sigma(iota, cfg)
    noise = rng.normals(o.data.size).reshape(o.data.shape)
    return Image8(quantize(o.to_float() + sigma * noise))


def low_light(o: Image8, iota: float, rng: RngStream, cfg: DegradationConfig = DEFAULT_CONFIG) -> Image8:
    nu = brightness_factor(iota, cfg)
    sigma = low_light_sigma(iota, cfg)
    noise = rng.normals(o.data.size).reshape(o.data.shape)
    return Image8(quantize(nu * o.to_float() + sigma * noise))


# --- JPEG ---
def jpeg_compress(o: Image8, iota: float, cfg: DegradationConfig = DEFAULT_CONFIG) -> Image8:
    """Codifica y decodifica JPEG baseline secuencial, 4:2:0, calidad q."""
    q = jpeg_quality(iota, cfg)
    try:
        buf = io.BytesIO()
        Image.fromarray(np.asarray(o.data)).save(
            buf, format="JPEG", quality=q, subsampling=2, optimize=False, progressive=False
        )
        buf.seek(0)
        with Image.open(buf) as im:
            data = np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except OSError as e:
        raise ImageIOError(f"Fallo del códec JPEG (q={q}): {e}") from e
    logger.debug(f"JPEG: calidad q={q}")
    return Image8(data)


# --- Despacho ---
_Stochastic = Callable[[Image8, float, RngStream, DegradationConfig], Image8]
_Deterministic = Callable[[Image8, float, DegradationConfig], Image8]

_STOCHASTIC: Dict[CorruptionMode, _Stochastic] = {
    CorruptionMode.RAIN: rain,
    CorruptionMode.SNOW: snow,
    CorruptionMode.MOTION_BLUR: motion_blur,
    CorruptionMode.GAUSSIAN_NOISE: gaussian_noise,
    CorruptionMode.LOW_LIGHT: low_light,
}
_DETERMINISTIC: Dict[CorruptionMode, _Deterministic] = {
    CorruptionMode.HAZE: haze,
    CorruptionMode.JPEG: jpeg_compress,
}


def apply(
    mode: CorruptionMode,
    o: Image8,
    iota: float,
    rng: RngStream,
    cfg: DegradationConfig = DEFAULT_CONFIG,
) -> Image8:
    """D_k(o; ι, ξ): aplica el operador del modo k consumiendo de `rng`."""
    mode = CorruptionMode.from_name(mode)
    iota = check_severity(iota)
    if mode in _DETERMINISTIC:
        return _DETERMINISTIC[mode](o, iota, cfg)
    return _STOCHASTIC[mode](o, iota, rng, cfg)
