# engine/services/dataset_forge.py
# -*- coding: utf-8 -*-

"""
Generación offline del dataset pareado:
(degradada, limpia, solo-agente, máscara, modo, severidad, split).

Entrada: `<root>/<tarea>/<idx>_clean.png` y `<idx>_uniformbg.png` (cuadros ya
renderizados; este motor no ejecuta simuladores).
Salida: PNGs en `<out>/<tarea>/<modo>/` y un manifiesto JSONL (cabecera +
un SampleRecord por línea) escrito de forma atómica al final.
"""

import json
import logging
import os
import re
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from engine.core.config import ArtifactHeader, ChromaKeyConfig, DegradationConfig, EngineConfig
from engine.core.errors import ConfigurationError, ImageIOError, ImageValidationError
from engine.core.image import Image8, Mask, composite, denormalize, normalize, read_png, write_png
from engine.core.modes import CorruptionMode
from engine.core.rng import RngStream
from engine.services import degradations

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES_PER_PAIR = 5000
DEFAULT_SPLIT_RATIO = 0.9
MANIFEST_NAME = "manifest.jsonl"
_FRAME_RE = re.compile(r"^(\d+)_clean\.png$")
_DIGITS_RE = re.compile(r"(\d+)")

Split = Literal["train", "val"]


# --- Tipos ---
class SampleRecord(BaseModel):
    """Una fila del manifiesto; las rutas son relativas al directorio de salida."""
    sample_id: str
    task_name: str
    mode: int
    mode_name: str
    severity: float
    split: Split
    degraded: str
    clean: str
    agent_only: str
    mask: str
    frame_idx: int
    seed: int
    substream: List[Union[str, int]]


@dataclass(frozen=True, eq=False)
class ForgedSample:
    """Muestra en memoria antes de escribirse a disco."""
    degraded: Image8
    clean: Image8
    agent_only: Image8
    mask: Mask
    mode: CorruptionMode
    severity: float


# --- Operaciones ---
def chroma_key_mask(uniform_bg_frame: Image8, cfg: ChromaKeyConfig) -> Mask:
    """1 si max_c |píxel − referencia| > tolerancia, si no 0 (distancia Chebyshev)."""
    ref = np.asarray(cfg.reference, dtype=np.int16)
    dist = np.abs(uniform_bg_frame.data.astype(np.int16) - ref).max(axis=2)
    return Mask((dist > cfg.tolerance).astype(np.float64))


def jitter_band(mode: CorruptionMode, cfg: DegradationConfig) -> Tuple[float, float]:
    """[0.9·ῑ_k, 1.1·ῑ_k] ∩ [0,1]."""
    base = cfg.base_severity(mode)
    return max(0.0, (1.0 - cfg.band_jitter) * base), min(1.0, (1.0 + cfg.band_jitter) * base)


def draw_severity(mode: CorruptionMode, cfg: DegradationConfig, rng: RngStream) -> float:
    low, high = jitter_band(mode, cfg)
    return min(max(rng.uniform(low, high), low), high)


def agent_only_image(clean: Image8, mask: Mask) -> Image8:
    """clean ⊙ m + negro ⊙ (1 − m), pasando por el rango normalizado."""
    return denormalize(composite(normalize(clean), mask))


def make_sample(
    clean: Image8,
    uniform_bg: Image8,
    mode: CorruptionMode,
    cfg: DegradationConfig,
    rng: RngStream,
    chroma: ChromaKeyConfig,
    severity: Optional[float] = None,
) -> ForgedSample:
    """
    Una muestra: severidad con jitter ±10% alrededor de ῑ_k (1 extracción,
    salvo que se fije), degradación, máscara por chroma-key y composición.
    """
    if clean.shape != uniform_bg.shape:
        raise ImageValidationError(
            f"Forma del cuadro limpio {clean.shape} != fondo uniforme {uniform_bg.shape}"
        )
    mode = CorruptionMode.from_name(mode)
    if severity is None:
        iota = draw_severity(mode, cfg, rng)
    else:
        iota = degradations.check_severity(severity)
    degraded = degradations.apply(mode, clean, iota, rng, cfg)
    mask = chroma_key_mask(uniform_bg, chroma)
    return ForgedSample(
        degraded=degraded,
        clean=clean,
        agent_only=agent_only_image(clean, mask),
        mask=mask,
        mode=mode,
        severity=iota,
    )


def assign_split(rng: RngStream, split_ratio: float) -> Split:
    """Bernoulli(ρ) independiente por muestra: u < ρ -> train."""
    return "train" if rng.uniform() < split_ratio else "val"


def mask_to_image(mask: Mask) -> Image8:
    plane = (mask.data * 255.0).astype(np.uint8)
    return Image8(np.repeat(plane[..., None], 3, axis=2))


def image_to_mask(img: Image8) -> Mask:
    """Inversa de mask_to_image; exige los tres canales iguales y valores {0,255}."""
    data = img.data
    if not (np.array_equal(data[..., 0], data[..., 1]) and np.array_equal(data[..., 0], data[..., 2])):
        raise ImageValidationError("La máscara debe tener los tres canales iguales")
    plane = data[..., 0]
    if not np.all((plane == 0) | (plane == 255)):
        raise ImageValidationError("La máscara del dataset debe ser binaria {0,255}")
    return Mask(plane.astype(np.float64) / 255.0)


def frame_sort_key(name: str) -> Tuple[Tuple[Union[int, str], ...], str]:
    """Orden natural: los tramos numéricos se comparan como enteros (`f_2` < `f_10`)."""
    parts = _DIGITS_RE.split(name)
    return tuple(int(p) if i % 2 else p for i, p in enumerate(parts)), name


def discover_frames(root: Union[str, Path], task: str) -> List[str]:
    """
    Prefijos `<idx>` con par limpio/fondo-uniforme, ordenados numéricamente.
    Se devuelven tal como aparecen en disco (con ceros a la izquierda).
    """
    task_dir = Path(root) / task
    if not task_dir.is_dir():
        raise ImageIOError(f"No existe el directorio de la tarea: {task_dir}")
    names = []
    for entry in task_dir.iterdir():
        match = _FRAME_RE.match(entry.name)
        if match is None:
            continue
        bg = task_dir / f"{match.group(1)}_uniformbg.png"
        if not bg.is_file():
            raise ImageIOError(f"Falta el cuadro de fondo uniforme {bg}")
        names.append(match.group(1))
    if not names:
        raise ImageIOError(f"No hay cuadros '<idx>_clean.png' en {task_dir}")
    return sorted(names, key=frame_sort_key)


def _frame_paths(root: Path, task: str, frame_name: str) -> Tuple[Path, Path]:
    task_dir = Path(root) / task
    return task_dir / f"{frame_name}_clean.png", task_dir / f"{frame_name}_uniformbg.png"


@dataclass(frozen=True)
class _Job:
    root: Path
    out_dir: Path
    task: str
    mode: CorruptionMode
    index: int
    frame_name: str
    split_ratio: float
    seed: int
    image_size: int
    degradation: DegradationConfig
    chroma: ChromaKeyConfig


def _run_job(job: _Job) -> SampleRecord:
    clean_path, bg_path = _frame_paths(job.root, job.task, job.frame_name)
    clean = read_png(clean_path)
    uniform_bg = read_png(bg_path)
    expected = (job.image_size, job.image_size)
    for name, img in (("limpio", clean), ("fondo uniforme", uniform_bg)):
        if img.shape != expected:
            raise ImageValidationError(
                f"Cuadro {name} de {job.task}/{job.frame_name} es {img.shape}; se requiere {expected} (sin redimensionado)"
            )
    keys: List[Union[str, int]] = [job.task, int(job.mode), job.index]
    meta_rng = RngStream(job.seed).spawn(*keys, "meta")
    op_rng = RngStream(job.seed).spawn(*keys, "op")
    split = assign_split(meta_rng, job.split_ratio)
    # La severidad sale del flujo 'meta'; el operador consume solo de 'op'.
    iota = draw_severity(job.mode, job.degradation, meta_rng)
    sample = make_sample(clean, uniform_bg, job.mode, job.degradation, op_rng, job.chroma, severity=iota)

    sample_id = f"{job.task}-{job.mode.slug}-{job.index:05d}"
    rel_dir = Path(job.task) / job.mode.slug
    paths = {
        "degraded": rel_dir / f"{sample_id}_degraded.png",
        "clean": rel_dir / f"{sample_id}_clean.png",
        "agent_only": rel_dir / f"{sample_id}_agent_only.png",
        "mask": rel_dir / f"{sample_id}_mask.png",
    }
    write_png(sample.degraded, job.out_dir / paths["degraded"])
    write_png(sample.clean, job.out_dir / paths["clean"])
    write_png(sample.agent_only, job.out_dir / paths["agent_only"])
    write_png(mask_to_image(sample.mask), job.out_dir / paths["mask"])
    return SampleRecord(
        sample_id=sample_id,
        task_name=job.task,
        mode=int(job.mode),
        mode_name=job.mode.slug,
        severity=sample.severity,
        split=split,
        degraded=paths["degraded"].as_posix(),
        clean=paths["clean"].as_posix(),
        agent_only=paths["agent_only"].as_posix(),
        mask=paths["mask"].as_posix(),
        frame_idx=int(job.frame_name),
        seed=job.seed,
        substream=keys,
    )


def write_manifest_atomic(path: Path, header: ArtifactHeader, records: Sequence[SampleRecord]) -> Path:
    """Escribe en un temporal del mismo directorio y lo renombra con os.replace."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=".manifest-", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(header.model_dump_json() + "\n")
                for record in records:
                    fh.write(record.model_dump_json() + "\n")
            os.replace(tmp_name, path)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise
    except OSError as e:
        raise ImageIOError(f"No se pudo escribir el manifiesto {path}: {e}") from e
    return path


def generate_dataset(
    root: Union[str, Path],
    tasks: Sequence[str],
    modes: Sequence[CorruptionMode],
    n_per_pair: int,
    split_ratio: float,
    seed: int,
    engine_config: EngineConfig,
    out_dir: Union[str, Path],
    header: ArtifactHeader,
    image_size: int = 84,
    jobs: int = 1,
) -> Path:
    """
    Emite n_per_pair muestras por cada (tarea, modo). La muestra i usa el cuadro
    (i mod F) de la tarea. Cada muestra tiene sub-flujos propios, por lo que el
    resultado es idéntico byte a byte para cualquier número de workers.
    """
    if n_per_pair < 0:
        raise ConfigurationError(f"n debe ser >= 0: {n_per_pair}")
    if not 0.0 <= split_ratio <= 1.0:
        raise ConfigurationError(f"split_ratio fuera de [0,1]: {split_ratio}")
    root = Path(root)
    out_dir = Path(out_dir)
    modes = [CorruptionMode.from_name(m) for m in modes]

    job_list: List[_Job] = []
    for task in tasks:
        chroma = engine_config.chroma_keys.get(task)
        if chroma is None:
            raise ConfigurationError(
                f"Falta la configuración chroma-key de la tarea '{task}' (no hay valor por defecto)"
            )
        if n_per_pair == 0:
            continue
        names = discover_frames(root, task)
        logger.info(f"Tarea '{task}': {len(names)} pares de cuadros disponibles")
        for mode in modes:
            for i in range(n_per_pair):
                job_list.append(_Job(
                    root=root, out_dir=out_dir, task=task, mode=mode, index=i,
                    frame_name=names[i % len(names)], split_ratio=split_ratio, seed=seed,
                    image_size=image_size, degradation=engine_config.degradation, chroma=chroma,
                ))

    logger.info(f"Generando {len(job_list)} muestras ({len(tasks)} tareas × {len(modes)} modos × {n_per_pair}), jobs={jobs}")
    if jobs > 1 and job_list:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_job, job_list, chunksize=max(1, len(job_list) // (4 * jobs))))
    else:
        records = [_run_job(job) for job in job_list]

    manifest = write_manifest_atomic(out_dir / MANIFEST_NAME, header, records)
    n_train = sum(1 for r in records if r.split == "train")
    logger.info(f"Manifiesto escrito en {manifest}: {len(records)} muestras ({n_train} train)")
    return manifest


# --- Lectura y validación ---
def load_manifest(path: Union[str, Path]) -> Tuple[ArtifactHeader, List[SampleRecord]]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ImageIOError(f"No se pudo leer el manifiesto {path}: {e}") from e
    if not lines:
        raise ConfigurationError(f"Manifiesto vacío (sin cabecera): {path}")
    try:
        header = ArtifactHeader.model_validate_json(lines[0])
        records = [SampleRecord.model_validate_json(line) for line in lines[1:] if line.strip()]
    except ValidationError as e:
        raise ConfigurationError(f"Manifiesto malformado {path}: {e}") from e
    return header, records


def validate_record(root: Union[str, Path], record: SampleRecord) -> None:
    """Re-verifica los invariantes de una fila: archivos legibles, máscara binaria y composición."""
    root = Path(root)
    if CorruptionMode(record.mode).slug != record.mode_name:
        raise ImageValidationError(f"{record.sample_id}: código y nombre de modo no coinciden")
    degradations.check_severity(record.severity)
    degraded = read_png(root / record.degraded)
    clean = read_png(root / record.clean)
    agent_only = read_png(root / record.agent_only)
    mask = image_to_mask(read_png(root / record.mask))
    shapes = {degraded.shape, clean.shape, agent_only.shape, mask.shape}
    if len(shapes) != 1:
        raise ImageValidationError(f"{record.sample_id}: formas inconsistentes {shapes}")
    expected = clean.data.astype(np.int16) * mask.data[..., None].astype(np.int16)
    diff = np.abs(agent_only.data.astype(np.int16) - expected)
    if diff.max() > 1:
        raise ImageValidationError(
            f"{record.sample_id}: agent_only difiere de clean⊙mask en {int(diff.max())} LSB"
        )


def summarize_manifest(records: Sequence[SampleRecord]) -> Dict[str, float]:
    n = len(records)
    n_train = sum(1 for r in records if r.split == "train")
    return {"samples": float(n), "train": float(n_train), "train_fraction": (n_train / n) if n else 0.0}
