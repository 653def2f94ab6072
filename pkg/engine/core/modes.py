# engine/core/modes.py
# -*- coding: utf-8 -*-

"""
Modos de corrupción. El código entero 1..7 y el nombre corto son estables
entre versiones: aparecen en trazas, manifiestos y en la CLI.
"""

from enum import IntEnum
from typing import Union


class CorruptionMode(IntEnum):
    RAIN = 1
    HAZE = 2
    SNOW = 3
    MOTION_BLUR = 4
    GAUSSIAN_NOISE = 5
    LOW_LIGHT = 6
    JPEG = 7

    @property
    def slug(self) -> str:
        """Nombre corto en minúsculas (ej. 'motion_blur')."""
        return self.name.lower()

    @classmethod
    def from_name(cls, value: Union[str, int, "CorruptionMode"]) -> "CorruptionMode":
        """Acepta slug, nombre del enum, código entero o el propio modo."""
        if isinstance(value, CorruptionMode):
            return value
        if isinstance(value, int):
            return cls(value)
        key = str(value).strip().upper().replace("-", "_")
        if key.isdigit():
            return cls(int(key))
        try:
            return cls[key]
        except KeyError:
            valid = [m.slug for m in cls]
            raise ValueError(f"Modo de corrupción inválido: '{value}'. Usar: {valid}") from None


ALL_MODES = tuple(CorruptionMode)
