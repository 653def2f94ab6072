# engine/core/errors.py
# -*- coding: utf-8 -*-

"""
Jerarquía de excepciones del motor.
Cada clase lleva su código de salida para que los handlers de la CLI
traduzcan fallos a exit codes estables (0 ok, 1 validación, 2 E/S, 3 teoría).
"""

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_THEORY_VIOLATION = 3


class EngineError(Exception):
    """Error base del motor."""
    exit_code: int = EXIT_VALIDATION


class ImageValidationError(EngineError, ValueError):
    """Imagen, máscara o kernel con forma o rango inválido."""


class ConfigurationError(EngineError, ValueError):
    """Parámetro o archivo de configuración inválido."""


class ImageIOError(EngineError, OSError):
    """Fallo de lectura/escritura de imágenes, manifiestos o trazas."""
    exit_code = EXIT_IO


class SchedulerInvariantError(EngineError, AssertionError):
    """La severidad salió de la banda de su modo."""


class AssumptionError(EngineError, ValueError):
    """Supuestos del laboratorio de información no satisfechos."""


class StochasticEncoderError(AssumptionError):
    """Se pidió una identidad que requiere encoder determinista."""


class TheoryViolation(EngineError):
    """Una cota verificada numéricamente no se cumple."""
    exit_code = EXIT_THEORY_VIOLATION
