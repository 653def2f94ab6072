"""Motor determinista de corrupciones visuales y laboratorio de información."""
from .core.config import ENGINE_VERSION as __version__
from .main import main

__all__ = ['main', '__version__']
