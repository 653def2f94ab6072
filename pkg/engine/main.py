# engine/main.py
# -*- coding: utf-8 -*-

"""
Punto de entrada de la CLI del motor de corrupción.
Registra un subcomando por handler y devuelve su código de salida.
"""

import argparse
import logging
import sys
from typing import List, NoReturn, Optional

from engine.core.config import ENGINE_VERSION, settings
from engine.core.errors import EXIT_VALIDATION
from engine.handlers import commands, reports
from engine.services import dataset_forge, scheduler, theory_sweep

# Configuración básica de logging
logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    level=settings.LOG_LEVEL,
)
logging.getLogger("PIL").setLevel(logging.WARNING)  # Silenciar PIL
logger = logging.getLogger(__name__)


class EngineArgumentParser(argparse.ArgumentParser):
    """Los errores de uso salen con el código de validación (1), no con el 2 de argparse."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser, jobs: bool = False) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Semilla de 64 bits (defecto: ENGINE_DEFAULT_SEED)")
    parser.add_argument("--config", type=str, default=None, help="Archivo JSON de configuración del motor")
    if jobs:
        parser.add_argument("--jobs", type=int, default=None, help="Número de procesos (defecto: ENGINE_JOBS)")


def build_parser() -> argparse.ArgumentParser:
    parser = EngineArgumentParser(
        prog="corruption-engine",
        description="Motor determinista de corrupciones visuales y laboratorio de información.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {ENGINE_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="Corrompe un PNG con un modo y severidad fijos")
    p.add_argument("input", type=str)
    p.add_argument("output", type=str)
    p.add_argument("--mode", required=True)
    p.add_argument("--severity", type=float, required=True)
    _add_common(p)
    p.set_defaults(handler=commands.cmd_corrupt)

    p = sub.add_parser("stream", help="Corrompe una secuencia de cuadros con la cadena markoviana")
    p.add_argument("frames_dir", type=str)
    p.add_argument("out_dir", type=str)
    p.add_argument("--ps", type=float, default=scheduler.DEFAULT_STICKINESS)
    p.add_argument("--montage", type=int, default=None, help="Emite una hoja de contactos cada N cuadros")
    p.add_argument("--mode", default=None, help="Fija el modo inicial (con --ps 1.0, un único modo por episodio)")
    p.add_argument("--severity", type=float, default=None, help="Fija la severidad inicial")
    _add_common(p, jobs=True)
    p.set_defaults(handler=commands.cmd_stream)

    p = sub.add_parser("gen-dataset", help="Genera el dataset pareado (degradada, limpia, máscara)")
    p.add_argument("root", type=str)
    p.add_argument("--tasks", nargs="+", required=True)
    p.add_argument("--modes", nargs="+", default=None)
    p.add_argument("--n", type=int, default=dataset_forge.DEFAULT_SAMPLES_PER_PAIR)
    p.add_argument("--split-ratio", type=float, default=dataset_forge.DEFAULT_SPLIT_RATIO)
    p.add_argument("--chroma", action="append", default=None, metavar="TASK:R,G,B:TOL")
    p.add_argument("--out", type=str, default=None)
    _add_common(p, jobs=True)
    p.set_defaults(handler=commands.cmd_gen_dataset)

    p = sub.add_parser("verify-theory", help="Verificación exacta de las cotas en instancias finitas")
    p.add_argument("--instances", type=int, default=theory_sweep.DEFAULT_INSTANCES)
    p.add_argument("--max-alphabet", type=int, default=theory_sweep.DEFAULT_MAX_ALPHABET)
    p.add_argument("--only-instance", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    _add_common(p, jobs=True)
    p.set_defaults(handler=reports.cmd_verify_theory)

    p = sub.add_parser("stats", help="Estadísticas de una traza JSONL")
    p.add_argument("trace", type=str)
    p.set_defaults(handler=reports.cmd_stats)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Punto de entrada principal; devuelve el código de salida del handler."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # --help y --version salen con 0; los errores de uso con EXIT_VALIDATION.
        return int(e.code or 0)
    logger.debug(f"Ejecutando comando '{args.command}'")
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
