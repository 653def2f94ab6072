"""Configuración central y primitivas compartidas del motor."""
from .config import DegradationConfig, EngineConfig, RunConfig, Settings
from .modes import CorruptionMode

__all__ = ['Settings', 'DegradationConfig', 'EngineConfig', 'RunConfig', 'CorruptionMode']
