# engine/core/rng.py
# -*- coding: utf-8 -*-

"""
Flujo de números aleatorios basado en contador (Philox 4x64 de numpy).

Un RngStream queda definido por (seed, counter): `counter` es el número de
salidas de 64 bits ya consumidas, de modo que RngStream(seed, counter)
reproduce exactamente la continuación en cualquier plataforma.
Cada uniforme consume una salida; cada normal consume una uniforme
(transformada inversa de la CDF), así el conteo de extracciones es exacto.
"""

import hashlib
import logging
from typing import Union

import numpy as np
from scipy.special import ndtri

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
# Philox4x64 entrega 4 salidas de 64 bits por incremento del contador interno.
_OUTPUTS_PER_BLOCK = 4
# Las uniformes son múltiplos de 2^-53 en [0,1); sumar 2^-54 las lleva a (0,1).
_HALF_ULP = 2.0 ** -54

Key = Union[int, str]


def derive_seed(seed: int, *keys: Key) -> int:
    """Deriva una semilla de 64 bits independiente para (seed, *keys) con BLAKE2b."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed & _MASK64).to_bytes(8, "little"))
    for key in keys:
        token = f"{type(key).__name__}:{key}".encode("utf-8")
        h.update(len(token).to_bytes(4, "little"))
        h.update(token)
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """Flujo reproducible; avanza en sitio como un numpy.random.Generator."""

    __slots__ = ("_seed", "_counter", "_gen")

    def __init__(self, seed: int, counter: int = 0) -> None:
        if counter < 0:
            raise ValueError(f"counter debe ser >= 0: {counter}")
        self._seed = int(seed) & _MASK64
        self._counter = int(counter)
        block, offset = divmod(self._counter, _OUTPUTS_PER_BLOCK)
        self._gen = np.random.Generator(np.random.Philox(key=self._seed, counter=block))
        if offset:
            self._gen.random(offset)

    # --- Estado ---
    @property
    def seed(self) -> int:
        return self._seed

    @property
    def counter(self) -> int:
        return self._counter

    def copy(self) -> "RngStream":
        """Copia independiente en la misma posición."""
        return RngStream(self._seed, self._counter)

    def spawn(self, *keys: Key) -> "RngStream":
        """Sub-flujo independiente derivado de (seed, *keys); no consume del padre."""
        return RngStream(derive_seed(self._seed, *keys))

    # --- Extracciones ---
    def uniforms(self, n: int) -> np.ndarray:
        """n uniformes en [0,1) (53 bits)."""
        if n < 0:
            raise ValueError(f"n debe ser >= 0: {n}")
        values = self._gen.random(n)
        self._counter += n
        return values

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        u = float(self.uniforms(1)[0])
        return low + u * (high - low)

    def normals(self, n: int) -> np.ndarray:
        """n normales estándar vía ndtri(u + 2^-54)."""
        return ndtri(self.uniforms(n) + _HALF_ULP)

    def normal(self, scale: float = 1.0) -> float:
        return float(self.normals(1)[0]) * scale

    def __repr__(self) -> str:
        return f"RngStream(seed={self._seed}, counter={self._counter})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RngStream):
            return NotImplemented
        return (self._seed, self._counter) == (other._seed, other._counter)

    def __hash__(self) -> int:
        return hash((self._seed, self._counter))
