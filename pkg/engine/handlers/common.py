# engine/handlers/common.py
# -*- coding: utf-8 -*-

"""
Piezas compartidas por los handlers de la CLI: configuración efectiva
(flag > archivo > defecto) y traducción de excepciones a códigos de salida.
"""

import argparse
import functools
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional

from engine.core.config import RunConfig, load_engine_config, settings
from engine.core.errors import EXIT_IO, EXIT_VALIDATION, EngineError

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace], int]


def exit_on_error(func: Handler) -> Handler:
    """Convierte cualquier fallo del handler en un código de salida y una línea de log."""

    @functools.wraps(func)
    def wrapper(args: argparse.Namespace) -> int:
        try:
            return func(args)
        except EngineError as e:
            logger.error(f"{func.__name__}: {type(e).__name__}: {e}")
            return e.exit_code
        except ValueError as e:
            logger.error(f"{func.__name__}: entrada inválida: {e}")
            return EXIT_VALIDATION
        except OSError as e:
            logger.error(f"{func.__name__}: error de E/S: {e}")
            return EXIT_IO
        except Exception as e:
            logger.exception(f"Error inesperado en {func.__name__}: {e}")
            return EXIT_VALIDATION

    return wrapper


def build_run_config(
    args: argparse.Namespace,
    output_dir: Optional[Path] = None,
    options: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Semilla y archivo de configuración: flag de la CLI y, si falta, variables ENGINE_*."""
    seed = args.seed if getattr(args, "seed", None) is not None else settings.DEFAULT_SEED
    config_file = getattr(args, "config", None) or settings.CONFIG_FILE
    engine = load_engine_config(Path(config_file) if config_file else None)
    return RunConfig(
        seed=seed,
        config_file=config_file,
        output_dir=output_dir or settings.OUTPUT_DIR,
        engine=engine,
        options=options or {},
    )


def resolve_jobs(args: argparse.Namespace) -> int:
    jobs = getattr(args, "jobs", None)
    return int(jobs) if jobs is not None else settings.JOBS
