# engine/services/scheduler.py
# -*- coding: utf-8 -*-

"""
Proceso de corrupción con conmutación markoviana:
cadena de modos "sticky", severidad uniforme al entrar a un modo y
paseo aleatorio recortado dentro de la banda mientras el modo persiste.

Orden de extracciones por paso (fijo, 2 por paso):
    1. uniforme para el modo siguiente (fila k_t de Π),
    2. uniforme de re-muestreo si el modo cambió, o normal η si persiste.
En t=0 se extraen: uniforme para el modo inicial y uniforme de severidad.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from engine.core.config import ArtifactHeader, DegradationConfig
from engine.core.errors import ConfigurationError, ImageIOError, SchedulerInvariantError
from engine.core.image import Image8
from engine.core.modes import ALL_MODES, CorruptionMode
from engine.core.rng import RngStream
from engine.services import degradations

logger = logging.getLogger(__name__)

DEFAULT_STICKINESS = 0.8
_ROW_TOLERANCE = 1e-12
_HISTOGRAM_BINS = 10


# --- Tipos ---
@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Matriz n×n estocástica por filas (Π_ij = Pr(k_t=j | k_{t-1}=i))."""
    probs: np.ndarray
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] != len(ALL_MODES):
            raise ConfigurationError(f"Π debe ser {len(ALL_MODES)}×{len(ALL_MODES)}; recibido {p.shape}")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ConfigurationError("Π con entradas fuera de [0,1]")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > _ROW_TOLERANCE):
            raise ConfigurationError(f"Las filas de Π deben sumar 1: {p.sum(axis=1)}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        cdf = np.cumsum(p, axis=1)
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)

    def next_mode(self, mode: CorruptionMode, u: float) -> CorruptionMode:
        """Inversa de la CDF de la fila del modo actual."""
        row = self._cdf[int(mode) - 1]
        idx = int(np.searchsorted(row, u, side="right"))
        return CorruptionMode(min(idx, len(row) - 1) + 1)


@dataclass(frozen=True)
class SeverityBand:
    low: float
    high: float

    def contains(self, iota: float) -> bool:
        return self.low <= iota <= self.high

    def clip(self, iota: float) -> float:
        return min(max(iota, self.low), self.high)


@dataclass(frozen=True)
class ScheduleState:
    """(k_t, ι_t) en el paso t; `rng` avanza en sitio al llamar a `step`."""
    mode: CorruptionMode
    severity: float
    step: int
    rng: RngStream = field(compare=False)


@dataclass(frozen=True, eq=False)
class StreamStep:
    frame: Image8
    mode: CorruptionMode
    severity: float
    step: int
    rng_counter_before: int


class TraceRecord(BaseModel):
    """Una línea de la traza JSONL."""
    step: int
    mode_code: int
    mode_name: str
    severity: float
    rng_counter_before: int


@dataclass
class TraceStats:
    n_steps: int
    mode_marginals: Dict[str, float]
    self_transition_rate: Optional[float]
    mean_segment_length: float
    severity_histograms: Dict[str, Dict[str, List[float]]]


# --- Operaciones ---
def sticky_matrix(p_s: float, n_modes: int = len(ALL_MODES)) -> TransitionMatrix:
    """Diagonal p_s, fuera de la diagonal (1 − p_s)/(n − 1)."""
    if not 0.0 <= p_s <= 1.0:
        raise ConfigurationError(f"p_s fuera de [0,1]: {p_s}")
    off = (1.0 - p_s) / (n_modes - 1)
    probs = np.full((n_modes, n_modes), off)
    np.fill_diagonal(probs, p_s)
    return TransitionMatrix(probs)


def severity_band(mode: CorruptionMode, cfg: DegradationConfig = degradations.DEFAULT_CONFIG) -> SeverityBand:
    """[max(floor, (1−δ)ῑ_k), min(1, (1+δ)ῑ_k)]."""
    base = cfg.base_severity(mode)
    low = max(cfg.band_floor, (1.0 - cfg.band_jitter) * base)
    high = min(1.0, (1.0 + cfg.band_jitter) * base)
    if low > high:
        raise ConfigurationError(f"Banda vacía para {CorruptionMode(mode).slug}: [{low}, {high}]")
    return SeverityBand(low, high)


def _check_band(mode: CorruptionMode, severity: float, cfg: DegradationConfig) -> None:
    band = severity_band(mode, cfg)
    if not band.contains(severity):
        raise SchedulerInvariantError(
            f"Severidad {severity} fuera de la banda [{band.low}, {band.high}] de {mode.slug}"
        )


def _draw_in_band(band: SeverityBand, u: float) -> float:
    return band.clip(band.low + u * (band.high - band.low))


def initial_state(
    rng: RngStream,
    cfg: DegradationConfig = degradations.DEFAULT_CONFIG,
    mode: Optional[CorruptionMode] = None,
    severity: Optional[float] = None,
) -> ScheduleState:
    """Estado en t=0: modo uniforme sobre 𝒦 y ι ~ U[banda], salvo que se fijen."""
    u_mode, u_sev = rng.uniforms(2)
    if mode is None:
        mode = ALL_MODES[min(int(u_mode * len(ALL_MODES)), len(ALL_MODES) - 1)]
    mode = CorruptionMode.from_name(mode)
    if severity is None:
        severity = _draw_in_band(severity_band(mode, cfg), float(u_sev))
        _check_band(mode, severity, cfg)
    else:
        severity = degradations.check_severity(severity)
    return ScheduleState(mode=mode, severity=severity, step=0, rng=rng)


def step(
    state: ScheduleState,
    transition: TransitionMatrix,
    cfg: DegradationConfig = degradations.DEFAULT_CONFIG,
) -> ScheduleState:
    """Un paso de la cadena: modo siguiente y luego severidad (re-muestreo o paseo)."""
    rng = state.rng
    new_mode = transition.next_mode(state.mode, rng.uniform())
    band = severity_band(new_mode, cfg)
    if new_mode != state.mode:
        severity = _draw_in_band(band, rng.uniform())
    else:
        # η se extrae aunque el recorte vaya a actuar.
        severity = band.clip(state.severity + rng.normal(cfg.walk_sigma))
    _check_band(new_mode, severity, cfg)
    return replace(state, mode=new_mode, severity=severity, step=state.step + 1)


def run_schedule(
    n_steps: int,
    transition: TransitionMatrix,
    cfg: DegradationConfig = degradations.DEFAULT_CONFIG,
    seed: int = 0,
    mode: Optional[CorruptionMode] = None,
    severity: Optional[float] = None,
) -> List[TraceRecord]:
    """Traza de n_steps pasos (sin cuadros) en el sub-flujo 'schedule' de la semilla."""
    if n_steps < 1:
        raise ConfigurationError(f"n_steps debe ser >= 1: {n_steps}")
    rng = RngStream(seed).spawn("schedule")
    records: List[TraceRecord] = []
    counter = rng.counter
    state = initial_state(rng, cfg, mode=mode, severity=severity)
    for t in range(n_steps):
        if t > 0:
            counter = rng.counter
            state = step(state, transition, cfg)
        records.append(TraceRecord(
            step=state.step,
            mode_code=int(state.mode),
            mode_name=state.mode.slug,
            severity=state.severity,
            rng_counter_before=counter,
        ))
    return records


def _corrupt_frame(args: Tuple[Image8, int, float, int, int, DegradationConfig]) -> Image8:
    frame, mode_code, severity, seed, t, cfg = args
    rng = RngStream(seed).spawn("frame", t)
    return degradations.apply(CorruptionMode(mode_code), frame, severity, rng, cfg)


def corrupt_stream(
    frames: Sequence[Image8],
    transition: TransitionMatrix,
    cfg: DegradationConfig = degradations.DEFAULT_CONFIG,
    seed: int = 0,
    jobs: int = 1,
    mode: Optional[CorruptionMode] = None,
    severity: Optional[float] = None,
) -> List[StreamStep]:
    """
    Corrompe una secuencia de cuadros en línea. El cuadro t usa el sub-flujo
    ('frame', t), así que la salida t depende solo de (frames[0..t], seed, Π, cfg)
    y el resultado es idéntico para cualquier número de workers.
    """
    if not frames:
        raise ConfigurationError("corrupt_stream requiere al menos un cuadro")
    trace = run_schedule(len(frames), transition, cfg, seed, mode=mode, severity=severity)
    tasks = [(f, r.mode_code, r.severity, seed, r.step, cfg) for f, r in zip(frames, trace)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_corrupt_frame, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        outputs = [_corrupt_frame(t) for t in tasks]
    logger.info(f"Secuencia corrompida: {len(frames)} cuadros, jobs={jobs}")
    return [
        StreamStep(
            frame=out,
            mode=CorruptionMode(r.mode_code),
            severity=r.severity,
            step=r.step,
            rng_counter_before=r.rng_counter_before,
        )
        for out, r in zip(outputs, trace)
    ]


# --- Traza JSONL ---
def write_trace(records: Iterable[TraceRecord], path: Union[str, Path], header: Optional[ArtifactHeader] = None) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            if header is not None:
                fh.write(header.model_dump_json() + "\n")
            for record in records:
                fh.write(record.model_dump_json() + "\n")
    except OSError as e:
        raise ImageIOError(f"No se pudo escribir la traza {path}: {e}") from e
    return path


def read_trace(path: Union[str, Path]) -> Tuple[Optional[ArtifactHeader], List[TraceRecord]]:
    """Lee una traza; la cabecera (si existe) es la línea con 'engine_version'."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ImageIOError(f"No se pudo leer la traza {path}: {e}") from e
    header: Optional[ArtifactHeader] = None
    records: List[TraceRecord] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
            if lineno == 1 and isinstance(payload, dict) and "engine_version" in payload:
                header = ArtifactHeader.model_validate(payload)
                continue
            record = TraceRecord.model_validate(payload)
            mode = CorruptionMode(record.mode_code)
        except (json.JSONDecodeError, ValidationError, ValueError) as e:
            raise ConfigurationError(f"Traza malformada en {path}:{lineno}: {e}") from e
        if mode.slug != record.mode_name:
            raise ConfigurationError(f"Traza malformada en {path}:{lineno}: código y nombre de modo no coinciden")
        records.append(record)
    if not records:
        raise ConfigurationError(f"La traza {path} no contiene pasos")
    return header, records


def trace_stats(records: Sequence[TraceRecord], cfg: DegradationConfig = degradations.DEFAULT_CONFIG) -> TraceStats:
    """Marginales de modo, tasa de auto-transición, longitud media de segmento e histogramas."""
    if not records:
        raise ConfigurationError("trace_stats requiere al menos un paso")
    codes = np.array([r.mode_code for r in records], dtype=np.int64)
    n = len(codes)
    marginals = {m.slug: float(np.count_nonzero(codes == int(m))) / n for m in ALL_MODES}
    if n > 1:
        stay = codes[1:] == codes[:-1]
        self_rate: Optional[float] = float(stay.mean())
        n_segments = int(n - np.count_nonzero(stay))
    else:
        self_rate = None
        n_segments = 1
    histograms: Dict[str, Dict[str, List[float]]] = {}
    severities = np.array([r.severity for r in records], dtype=np.float64)
    for m in ALL_MODES:
        values = severities[codes == int(m)]
        if values.size == 0:
            continue
        band = severity_band(m, cfg)
        counts, edges = np.histogram(values, bins=_HISTOGRAM_BINS, range=(band.low, band.high))
        histograms[m.slug] = {"edges": edges.tolist(), "counts": counts.astype(float).tolist()}
    return TraceStats(
        n_steps=n,
        mode_marginals=marginals,
        self_transition_rate=self_rate,
        mean_segment_length=n / n_segments,
        severity_histograms=histograms,
    )
