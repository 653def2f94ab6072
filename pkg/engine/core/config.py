# engine/core/config.py
# -*- coding: utf-8 -*-

"""
Configuración centralizada del motor de corrupción.
- Settings: variables de entorno / .env (pydantic-settings).
- DegradationConfig: constantes de los operadores y severidades base.
- EngineConfig: lo que se puede sobreescribir desde un archivo JSON.
- RunConfig / ArtifactHeader: lo que se registra en cada artefacto de salida.
"""

import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Any, Dict, Tuple, Literal, Annotated, get_args

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PositiveInt,
    field_validator,
    model_validator,
    ValidationError,
)
from pydantic_settings import BaseSettings, SettingsConfigDict

from engine.core.errors import ConfigurationError
from engine.core.modes import CorruptionMode

ENGINE_VERSION = "0.1.0"

# --- Definir Ruta Base del Proyecto ---
try:
    PROJECT_ROOT = Path(__file__).parent.parent.parent.resolve()
except NameError:
    PROJECT_ROOT = Path.cwd()

# --- Tipos Específicos ---
LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
Channel = Annotated[int, Field(ge=0, le=255)]
RGB = Tuple[Channel, Channel, Channel]

# --- Logger ---
logger = logging.getLogger(__name__)
if not logger.hasHandlers():
    handler = logging.StreamHandler(sys.stderr)
    formatter = logging.Formatter('%(asctime)s - %(name)s [%(levelname)s] - %(message)s')
    handler.setFormatter(formatter)
    logger.addHandler(handler)
    logger.setLevel(logging.WARNING)


# --- Helper para resolver rutas ---
def _resolve_path(value: Optional[Any]) -> Optional[Path]:
    if value:
        path = Path(value)
        if not path.is_absolute():
            if PROJECT_ROOT and PROJECT_ROOT.is_dir():
                return (PROJECT_ROOT / path).resolve()
            logger.warning(f"PROJECT_ROOT no válido, no se puede resolver: {value}")
            return path
        return path
    return None


# --- Clase Principal de Settings ---
class Settings(BaseSettings):
    """Carga y valida la configuración de proceso del motor."""

    LOG_LEVEL: LogLevel = Field(default='INFO', alias='ENGINE_LOG_LEVEL')
    OUTPUT_DIR: Path = Field(default=PROJECT_ROOT / "output", alias='ENGINE_OUTPUT_DIR')
    CONFIG_FILE: Optional[Path] = Field(default=None, alias='ENGINE_CONFIG_FILE')
    DEFAULT_SEED: int = Field(default=0, alias='ENGINE_DEFAULT_SEED')
    JOBS: PositiveInt = Field(default=1, alias='ENGINE_JOBS')
    IMAGE_SIZE: PositiveInt = Field(default=84, alias='ENGINE_IMAGE_SIZE')

    model_config = SettingsConfigDict(
        env_file=PROJECT_ROOT / '.env',
        env_file_encoding='utf-8',
        extra='ignore',
        case_sensitive=False,
        populate_by_name=True,
    )

    # --- Validadores ---
    @field_validator('LOG_LEVEL', mode='before')
    @classmethod
    def validate_log_level(cls, value: Any) -> str:
        """Valida y normaliza el nivel de log."""
        if not isinstance(value, str): raise ValueError("LOG_LEVEL debe ser str.")
        valid = get_args(LogLevel)
        upper_v = value.upper()
        if upper_v not in valid: raise ValueError(f"LOG_LEVEL inválido: '{value}'. Usar: {valid}")
        return upper_v

    @field_validator('OUTPUT_DIR', 'CONFIG_FILE', mode='before')
    @classmethod
    def resolve_paths(cls, value: Any) -> Optional[Path]:
        """Resuelve rutas relativas contra PROJECT_ROOT."""
        return _resolve_path(value)


# --- Constantes de los operadores ---
class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')


class RainConfig(_Frozen):
    opacity: float = Field(default=0.3, ge=0.0, le=1.0)
    streak_factor: int = Field(default=500, ge=0)
    length_min: float = Field(default=3.0, gt=0.0)
    length_max: float = Field(default=10.0, gt=0.0)
    angle_min_deg: float = 80.0
    angle_max_deg: float = 100.0
    color: RGB = (255, 255, 255)


class SnowConfig(_Frozen):
    opacity: float = Field(default=0.5, ge=0.0, le=1.0)
    flake_factor: int = Field(default=1000, ge=0)
    radii: Tuple[int, ...] = (1, 2)
    brightness_min: float = Field(default=200.0, ge=0.0, le=255.0)
    brightness_max: float = Field(default=255.0, ge=0.0, le=255.0)
    color: RGB = (255, 255, 255)


class HazeConfig(_Frozen):
    alpha_scale: float = Field(default=0.7, ge=0.0, le=1.0)
    color: RGB = (200, 200, 200)


class MotionBlurConfig(_Frozen):
    length_min: float = Field(default=5.0, ge=1.0)
    length_max: float = Field(default=25.0, ge=1.0)


class GaussianNoiseConfig(_Frozen):
    sigma_max: float = Field(default=25.0, ge=0.0)


class LowLightConfig(_Frozen):
    nu_min: float = Field(default=0.2, ge=0.0, le=1.0)
    sigma: float = Field(default=15.0, ge=0.0)


class JpegConfig(_Frozen):
    quality_min: int = Field(default=10, ge=1, le=95)
    quality_max: int = Field(default=90, ge=1, le=95)


DEFAULT_BASE_SEVERITIES: Dict[str, float] = {
    CorruptionMode.RAIN.slug: 0.6,
    CorruptionMode.HAZE.slug: 0.6,
    CorruptionMode.SNOW.slug: 0.6,
    CorruptionMode.MOTION_BLUR.slug: 0.35,
    CorruptionMode.GAUSSIAN_NOISE.slug: 0.5,
    CorruptionMode.LOW_LIGHT.slug: 0.7,
    CorruptionMode.JPEG.slug: 0.7,
}


class DegradationConfig(_Frozen):
    """Constantes por modo y dinámica de severidad (valores por defecto = benchmark)."""

    rain: RainConfig = RainConfig()
    snow: SnowConfig = SnowConfig()
    haze: HazeConfig = HazeConfig()
    motion_blur: MotionBlurConfig = MotionBlurConfig()
    gaussian_noise: GaussianNoiseConfig = GaussianNoiseConfig()
    low_light: LowLightConfig = LowLightConfig()
    jpeg: JpegConfig = JpegConfig()
    base_severities: Dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_BASE_SEVERITIES))
    band_jitter: float = Field(default=0.1, ge=0.0, le=1.0)
    band_floor: float = Field(default=0.1, ge=0.0, le=1.0)
    walk_sigma: float = Field(default=0.02, ge=0.0)
    mask_blur_sigma: float = Field(default=0.8, gt=0.0)

    @field_validator('base_severities', mode='after')
    @classmethod
    def validate_base_severities(cls, value: Dict[str, float]) -> Dict[str, float]:
        """Completa con los valores por defecto y exige ῑ_k ∈ [0,1]."""
        merged = dict(DEFAULT_BASE_SEVERITIES)
        for name, sev in value.items():
            slug = CorruptionMode.from_name(name).slug
            if not 0.0 <= float(sev) <= 1.0:
                raise ValueError(f"Severidad base fuera de [0,1] para '{name}': {sev}")
            merged[slug] = float(sev)
        return merged

    def base_severity(self, mode: CorruptionMode) -> float:
        return self.base_severities[CorruptionMode.from_name(mode).slug]

    def config_hash(self) -> str:
        """SHA-256 del JSON canónico (claves ordenadas)."""
        return _canonical_hash(self.model_dump(mode='json'))


class ChromaKeyConfig(_Frozen):
    """Color de referencia del fondo uniforme y tolerancia Chebyshev."""
    reference: RGB
    tolerance: int = Field(ge=0)

    @classmethod
    def parse(cls, text: str) -> Tuple[str, "ChromaKeyConfig"]:
        """Parsea 'tarea:R,G,B:TOL' (formato del flag --chroma)."""
        try:
            task, rgb, tol = text.split(":")
            reference = tuple(int(c) for c in rgb.split(","))
            return task.strip(), cls(reference=reference, tolerance=int(tol))  # type: ignore[arg-type]
        except (ValueError, ValidationError) as e:
            raise ConfigurationError(f"Chroma-key inválido '{text}' (usar tarea:R,G,B:TOL): {e}") from e


class EngineConfig(_Frozen):
    """Contenido del archivo de configuración JSON."""
    degradation: DegradationConfig = DegradationConfig()
    chroma_keys: Dict[str, ChromaKeyConfig] = Field(default_factory=dict)

    def config_hash(self) -> str:
        return _canonical_hash(self.model_dump(mode='json'))


def _canonical_hash(payload: Dict[str, Any]) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_engine_config(path: Optional[Path] = None) -> EngineConfig:
    """
    Carga EngineConfig desde JSON. Sin ruta devuelve los valores por defecto.
    Cualquier clave desconocida o valor fuera de rango es ConfigurationError.
    """
    if path is None:
        return EngineConfig()
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"No se pudo leer el archivo de configuración {path}: {e}") from e
    try:
        config = EngineConfig.model_validate_json(raw)
    except ValidationError as e:
        raise ConfigurationError(f"Configuración inválida en {path}: {e}") from e
    logger.info(f"Configuración cargada desde {path} (hash {config.config_hash()[:12]})")
    return config


# --- Registro de ejecución ---
class ArtifactHeader(BaseModel):
    """Primera línea de cada traza/manifiesto/reporte."""
    engine_version: str = ENGINE_VERSION
    command: str
    seed: int
    config_hash: str
    config: Dict[str, Any]
    options: Dict[str, Any] = Field(default_factory=dict)


class RunConfig(BaseModel):
    """Configuración efectiva de un comando (flag > archivo > defecto)."""
    seed: int
    config_file: Optional[Path] = None
    output_dir: Path
    engine: EngineConfig = EngineConfig()
    options: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode='after')
    def check_seed(self) -> 'RunConfig':
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"La semilla debe ser un entero de 64 bits sin signo: {self.seed}")
        return self

    def header(self, command: str) -> ArtifactHeader:
        return ArtifactHeader(
            command=command,
            seed=self.seed,
            config_hash=self.engine.config_hash(),
            config=self.engine.model_dump(mode='json'),
            options={k: _jsonable(v) for k, v in sorted(self.options.items())},
        )


def _jsonable(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


# --- Instancia Global de Configuración ---
try:
    settings = Settings()
except ValidationError as e:
    logger.critical("!!! Error CRÍTICO de Validación de Configuración del motor !!!")
    logger.critical(f"Revisa tus variables ENGINE_* o el archivo .env ({PROJECT_ROOT / '.env'}):")
    logger.critical(e)
    raise e


if __name__ == "__main__":
    print("--- Configuración cargada del motor ---")
    print(settings.model_dump_json(indent=2))
    print(EngineConfig().model_dump_json(indent=2))
