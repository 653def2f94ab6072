# engine/core/image.py
# -*- coding: utf-8 -*-

"""
Contenedores de píxeles y operaciones compartidas por todos los módulos:
normalización a [-1,1], convolución con padding replicado, composición
agent-centric sobre fondo constante y E/S PNG (RGB de 8 bits).

Convenciones: orden de canales RGB, aritmética interna en float64,
cuantización con redondeo half-to-even (np.rint) solo en los bordes.
"""

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, PngImagePlugin, UnidentifiedImageError
from scipy import ndimage

from engine.core.errors import ImageIOError, ImageValidationError

logger = logging.getLogger(__name__)

BLACK = (-1.0, -1.0, -1.0)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


def quantize(values: np.ndarray) -> np.ndarray:
    """Redondeo half-to-even y recorte a [0,255] -> uint8."""
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


# --- Tipos ---
@dataclass(frozen=True, eq=False)
class Image8:
    """Imagen RGB de 8 bits, forma (H, W, 3), fila mayor."""
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 3 or data.shape[2] != 3 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ImageValidationError(f"Image8 requiere forma (H, W, 3); recibido {data.shape}")
        if data.dtype != np.uint8:
            if not np.issubdtype(data.dtype, np.integer):
                raise ImageValidationError(f"Image8 requiere enteros; recibido {data.dtype}")
            if data.min() < 0 or data.max() > 255:
                raise ImageValidationError("Image8 con canales fuera de [0,255]")
            data = data.astype(np.uint8)
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def constant(cls, height: int, width: int, rgb: Sequence[int]) -> "Image8":
        data = np.empty((height, width, 3), dtype=np.uint8)
        data[...] = np.asarray(rgb, dtype=np.uint8)
        return cls(data)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def to_float(self) -> np.ndarray:
        return self.data.astype(np.float64)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Image8):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class ImageF:
    """Imagen RGB normalizada, float64 en [-1,1], forma (H, W, 3)."""
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ImageValidationError(f"ImageF requiere forma (H, W, 3); recibido {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ImageValidationError("ImageF contiene valores no finitos")
        if data.size and (data.min() < -1.0 or data.max() > 1.0):
            raise ImageValidationError("ImageF con valores fuera de [-1,1]")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def shape(self) -> Tuple[int, int]:
        return int(self.data.shape[0]), int(self.data.shape[1])


@dataclass(frozen=True, eq=False)
class Mask:
    """Máscara de un canal en [0,1], forma (H, W)."""
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise ImageValidationError(f"Mask requiere forma (H, W); recibido {data.shape}")
        if data.size and (not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0):
            raise ImageValidationError("Mask con valores fuera de [0,1]")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def shape(self) -> Tuple[int, int]:
        return int(self.data.shape[0]), int(self.data.shape[1])

    def is_binary(self) -> bool:
        return bool(np.all((self.data == 0.0) | (self.data == 1.0)))


@dataclass(frozen=True, eq=False)
class Kernel2D:
    """Kernel de convolución: dimensiones impares, pesos >= 0 que suman 1."""
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] % 2 == 0 or w.shape[1] % 2 == 0:
            raise ImageValidationError(f"Kernel2D requiere dimensiones impares; recibido {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ImageValidationError("Kernel2D con pesos negativos o no finitos")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ImageValidationError(f"Los pesos de Kernel2D deben sumar 1 (suma={w.sum()!r})")
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def identity(cls) -> "Kernel2D":
        return cls(np.ones((1, 1)))

    @classmethod
    def box(cls, size: int) -> "Kernel2D":
        return cls(np.full((size, size), 1.0 / (size * size)))

    @classmethod
    def gaussian(cls, size: int, sigma: float) -> "Kernel2D":
        half = (size - 1) / 2.0
        ax = np.arange(size, dtype=np.float64) - half
        g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
        w = np.outer(g, g)
        return cls(w / w.sum())

    @property
    def shape(self) -> Tuple[int, int]:
        return int(self.weights.shape[0]), int(self.weights.shape[1])


# --- Operaciones ---
def normalize(img: Image8) -> ImageF:
    """v -> 2·(v/255) − 1."""
    return ImageF(2.0 * (img.data.astype(np.float64) / 255.0) - 1.0)


def denormalize(img: ImageF) -> Image8:
    """v -> clamp(round_half_even(255·(v+1)/2), 0, 255)."""
    return Image8(quantize(255.0 * (img.data + 1.0) / 2.0))


def correlate_plane(plane: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Correlación 2D en float64 con padding replicado (mode='nearest')."""
    return ndimage.correlate(plane, weights, mode="nearest")


def convolve(img: Image8, k: Kernel2D) -> Image8:
    """Correlación por canal con padding replicado; salida cuantizada."""
    kh, kw = k.shape
    if kh > img.height or kw > img.width:
        raise ImageValidationError(
            f"Kernel {k.shape} más grande que la imagen {img.shape}"
        )
    src = img.to_float()
    out = np.empty_like(src)
    for c in range(3):
        out[..., c] = correlate_plane(src[..., c], k.weights)
    return Image8(quantize(out))


def composite(
    restored: ImageF,
    m: Mask,
    background: Sequence[float] = BLACK,
) -> ImageF:
    """
    x̃ = restored ⊙ m + b ⊙ (1 − m), con m difundida a los canales.
    Entradas fuera de rango se rechazan (ImageF, Mask y el fondo en [-1,1]); la
    combinación convexa queda en [-1,1] y el recorte final solo absorbe el
    redondeo de coma flotante.
    """
    if restored.shape != m.shape:
        raise ImageValidationError(f"composite: forma {restored.shape} != máscara {m.shape}")
    b = np.asarray(background, dtype=np.float64)
    if b.shape != (3,):
        raise ImageValidationError("composite: el fondo debe ser una constante RGB")
    if not np.all(np.isfinite(b)) or b.min() < -1.0 or b.max() > 1.0:
        raise ImageValidationError(f"composite: fondo fuera de [-1,1]: {b.tolist()}")
    weight = m.data[..., None]
    out = restored.data * weight + b * (1.0 - weight)
    return ImageF(np.clip(out, -1.0, 1.0))


# --- E/S PNG ---
_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_PNG_COLOR_RGB = 2


def _check_png_header(path: Path, head: bytes) -> None:
    """IHDR: profundidad de bits en el byte 24, tipo de color en el 25."""
    if len(head) < 26 or not head.startswith(_PNG_SIGNATURE) or head[12:16] != b"IHDR":
        raise ImageValidationError(f"{path}: no es un PNG válido")
    bit_depth, color_type = head[24], head[25]
    if bit_depth != 8 or color_type != _PNG_COLOR_RGB:
        raise ImageValidationError(
            f"{path}: PNG con profundidad {bit_depth} y tipo de color {color_type}; se esperaba RGB de 8 bits"
        )


def read_png(path: Union[str, Path]) -> Image8:
    """Lee un PNG RGB de 8 bits; rechaza alfa, paleta, gris y 16 bits."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            _check_png_header(path, fh.read(26))
        with Image.open(path) as im:
            if im.format != "PNG":
                raise ImageValidationError(f"{path}: formato {im.format}, se esperaba PNG")
            if im.mode != "RGB":
                raise ImageValidationError(f"{path}: modo {im.mode}, se esperaba RGB de 8 bits")
            data = np.asarray(im, dtype=np.uint8).copy()
    except FileNotFoundError as e:
        raise ImageIOError(f"No existe la imagen {path}") from e
    except UnidentifiedImageError as e:
        raise ImageValidationError(f"{path}: no es una imagen legible") from e
    except OSError as e:
        raise ImageIOError(f"Error leyendo {path}: {e}") from e
    return Image8(data)


def encode_png(img: Image8, metadata: Optional[Dict[str, str]] = None) -> bytes:
    """Codifica a PNG de forma determinista (chunks de texto en orden fijo)."""
    info = None
    if metadata:
        info = PngImagePlugin.PngInfo()
        for key in sorted(metadata):
            info.add_text(key, str(metadata[key]))
    buf = io.BytesIO()
    Image.fromarray(np.asarray(img.data)).save(buf, format="PNG", pnginfo=info)
    return buf.getvalue()


def write_png(img: Image8, path: Union[str, Path], metadata: Optional[Dict[str, str]] = None) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_png(img, metadata))
    except OSError as e:
        raise ImageIOError(f"No se pudo escribir {path}: {e}") from e
    return path


def montage(frames: Sequence[Image8], columns: int = 8) -> Image8:
    """Hoja de contactos: rejilla fila mayor, celdas vacías en negro."""
    if not frames:
        raise ImageValidationError("montage: lista de cuadros vacía")
    h, w = frames[0].shape
    if any(f.shape != (h, w) for f in frames):
        raise ImageValidationError("montage: todos los cuadros deben tener la misma forma")
    columns = max(1, min(columns, len(frames)))
    rows = -(-len(frames) // columns)
    sheet = np.zeros((rows * h, columns * w, 3), dtype=np.uint8)
    for i, frame in enumerate(frames):
        r, c = divmod(i, columns)
        sheet[r * h:(r + 1) * h, c * w:(c + 1) * w] = frame.data
    return Image8(sheet)
