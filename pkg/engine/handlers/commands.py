# engine/handlers/commands.py
# -*- coding: utf-8 -*-

"""
Handlers de los comandos que producen imágenes: corrupt, stream y gen-dataset.
Cada handler recibe el Namespace de argparse y devuelve un código de salida.
"""

import argparse
import logging
from pathlib import Path
from typing import Dict, List

from engine.core.config import EngineConfig, ChromaKeyConfig, settings
from engine.core.errors import EXIT_OK, ConfigurationError, ImageIOError
from engine.core.image import Image8, montage, read_png, write_png
from engine.core.modes import ALL_MODES, CorruptionMode
from engine.core.rng import RngStream
from engine.handlers.common import build_run_config, exit_on_error, resolve_jobs
from engine.services import dataset_forge, degradations, scheduler

logger = logging.getLogger(__name__)

MONTAGE_COLUMNS = 8


def _png_metadata(header_fields: Dict[str, object]) -> Dict[str, str]:
    return {f"engine:{key}": str(value) for key, value in header_fields.items()}


# --- corrupt ---
@exit_on_error
def cmd_corrupt(args: argparse.Namespace) -> int:
    """Aplica un modo de corrupción a un único PNG."""
    mode = CorruptionMode.from_name(args.mode)
    iota = degradations.check_severity(args.severity)
    run = build_run_config(args, options={"mode": mode.slug, "severity": iota})
    cfg = run.engine.degradation
    logger.info(f"Comando corrupt: {args.input} -> {args.output} (modo={mode.slug}, ι={iota}, seed={run.seed})")

    img = read_png(args.input)
    rng = RngStream(run.seed)
    out = degradations.apply(mode, img, iota, rng, cfg)
    if mode is CorruptionMode.JPEG:
        logger.info(f"Calidad JPEG q={degradations.jpeg_quality(iota, cfg)}")

    header = run.header("corrupt")
    write_png(out, args.output, metadata=_png_metadata({
        "engine_version": header.engine_version,
        "seed": header.seed,
        "config_hash": header.config_hash,
        "mode": mode.slug,
        "severity": iota,
    }))
    print(f"mode={mode.slug} severity={iota:.6f} rng_draws={rng.counter}")
    return EXIT_OK


# --- stream ---
def _list_frames(frames_dir: Path) -> List[Path]:
    if not frames_dir.is_dir():
        raise ImageIOError(f"No existe el directorio de cuadros: {frames_dir}")
    pngs = [p for p in frames_dir.iterdir() if p.suffix.lower() == ".png"]
    paths = sorted(pngs, key=lambda p: dataset_forge.frame_sort_key(p.name))
    if not paths:
        raise ConfigurationError(f"El directorio {frames_dir} no contiene PNGs")
    return paths


@exit_on_error
def cmd_stream(args: argparse.Namespace) -> int:
    """
    Corrompe una secuencia ordenada de cuadros con el proceso markoviano.
    --mode y --severity fijan el estado inicial; con --ps 1.0 el episodio
    queda en una sola corrupción.
    """
    frames_dir, out_dir = Path(args.frames_dir), Path(args.out_dir)
    jobs = resolve_jobs(args)
    mode = CorruptionMode.from_name(args.mode) if args.mode is not None else None
    severity = degradations.check_severity(args.severity) if args.severity is not None else None
    options = {
        "ps": args.ps,
        "montage": args.montage,
        "mode": mode.slug if mode is not None else None,
        "severity": severity,
    }
    # jobs no entra en la cabecera: la salida es la misma para cualquier valor.
    run = build_run_config(args, output_dir=out_dir, options=options)
    cfg = run.engine.degradation
    paths = _list_frames(frames_dir)
    logger.info(f"Comando stream: {len(paths)} cuadros desde {frames_dir}, p_s={args.ps}, seed={run.seed}")

    frames = [read_png(p) for p in paths]
    transition = scheduler.sticky_matrix(args.ps)
    steps = scheduler.corrupt_stream(
        frames, transition, cfg, seed=run.seed, jobs=jobs, mode=mode, severity=severity
    )

    header = run.header("stream")
    for s in steps:
        write_png(s.frame, out_dir / f"frame_{s.step:05d}.png", metadata=_png_metadata({
            "engine_version": header.engine_version,
            "seed": header.seed,
            "config_hash": header.config_hash,
            "step": s.step,
            "mode": s.mode.slug,
            "severity": repr(s.severity),
        }))
    records = [
        scheduler.TraceRecord(
            step=s.step,
            mode_code=int(s.mode),
            mode_name=s.mode.slug,
            severity=s.severity,
            rng_counter_before=s.rng_counter_before,
        )
        for s in steps
    ]
    trace_path = scheduler.write_trace(records, out_dir / "trace.jsonl", header=header)

    if args.montage:
        per_sheet = int(args.montage)
        if per_sheet < 1:
            raise ConfigurationError(f"--montage debe ser >= 1: {per_sheet}")
        for sheet, start in enumerate(range(0, len(steps), per_sheet)):
            chunk: List[Image8] = [s.frame for s in steps[start:start + per_sheet]]
            write_png(montage(chunk, columns=MONTAGE_COLUMNS), out_dir / f"montage_{sheet:03d}.png")

    logger.info(f"Traza escrita en {trace_path}")
    print(f"frames={len(steps)} trace={trace_path}")
    return EXIT_OK


# --- gen-dataset ---
def _merge_chroma(engine: EngineConfig, flags: List[str]) -> EngineConfig:
    """Los flags --chroma tienen prioridad sobre el archivo de configuración."""
    keys: Dict[str, ChromaKeyConfig] = dict(engine.chroma_keys)
    for text in flags or []:
        task, cfg = ChromaKeyConfig.parse(text)
        keys[task] = cfg
    return EngineConfig(degradation=engine.degradation, chroma_keys=keys)


@exit_on_error
def cmd_gen_dataset(args: argparse.Namespace) -> int:
    """Genera el dataset pareado a partir de cuadros limpios renderizados."""
    out_dir = Path(args.out) if args.out else settings.OUTPUT_DIR / "dataset"
    modes = [CorruptionMode.from_name(m) for m in (args.modes or [m.slug for m in ALL_MODES])]
    options = {
        "root": str(args.root),
        "tasks": list(args.tasks),
        "modes": [m.slug for m in modes],
        "n": args.n,
        "split_ratio": args.split_ratio,
    }
    run = build_run_config(args, output_dir=out_dir, options=options)
    engine = _merge_chroma(run.engine, args.chroma)
    run = run.model_copy(update={"engine": engine})
    logger.info(f"Comando gen-dataset: tareas={list(args.tasks)}, modos={[m.slug for m in modes]}, n={args.n}")

    manifest = dataset_forge.generate_dataset(
        root=Path(args.root),
        tasks=list(args.tasks),
        modes=modes,
        n_per_pair=args.n,
        split_ratio=args.split_ratio,
        seed=run.seed,
        engine_config=engine,
        out_dir=out_dir,
        header=run.header("gen-dataset"),
        image_size=settings.IMAGE_SIZE,
        jobs=resolve_jobs(args),
    )
    _, records = dataset_forge.load_manifest(manifest)
    summary = dataset_forge.summarize_manifest(records)
    print(f"manifest={manifest} samples={int(summary['samples'])} train={int(summary['train'])}")
    return EXIT_OK
