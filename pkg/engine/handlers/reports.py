# engine/handlers/reports.py
# -*- coding: utf-8 -*-

"""
Handlers de los comandos de verificación y estadística: verify-theory y stats.
"""

import argparse
import dataclasses
import json
import logging
from pathlib import Path

from engine.core.config import DegradationConfig, settings
from engine.core.errors import EXIT_OK, ConfigurationError, TheoryViolation
from engine.handlers.common import build_run_config, exit_on_error, resolve_jobs
from engine.services import scheduler, theory_sweep

logger = logging.getLogger(__name__)


@exit_on_error
def cmd_verify_theory(args: argparse.Namespace) -> int:
    """Barrido exacto de instancias finitas; sale con 3 si alguna cota falla."""
    if args.instances < 1:
        raise ConfigurationError(f"--instances debe ser >= 1: {args.instances}")
    out_path = Path(args.out) if args.out else settings.OUTPUT_DIR / "theory_report.jsonl"
    options = {
        "instances": args.instances,
        "max_alphabet": args.max_alphabet,
        "only_instance": args.only_instance,
    }
    run = build_run_config(args, output_dir=out_path.parent, options=options)
    logger.info(f"Comando verify-theory: {args.instances} instancias, |alfabeto| ≤ {args.max_alphabet}, seed={run.seed}")

    reports = theory_sweep.run_sweep(
        seed=run.seed,
        n_instances=args.instances,
        max_alphabet=args.max_alphabet,
        jobs=resolve_jobs(args),
        only_instance=args.only_instance,
    )
    summary = theory_sweep.summarize(reports)
    theory_sweep.write_report(out_path, run.header("verify-theory"), reports, summary)
    logger.info(
        f"Reporte en {out_path}: {summary.instances} instancias, {summary.violations} violaciones, "
        f"{summary.out_of_domain} fuera de dominio (ε > 1/2)"
    )
    print(summary.model_dump_json())

    if summary.violations:
        for instance_id in summary.instances_with_violations:
            dump = theory_sweep.dump_instance(run.seed, instance_id, args.max_alphabet)
            path = theory_sweep.write_instance_dump(out_path.parent / f"instance_{instance_id}.json", dump)
            logger.error(f"Instancia {instance_id} volcada en {path} (repetir con --only-instance {instance_id})")
        raise TheoryViolation(
            f"{summary.violations} violaciones en las instancias {summary.instances_with_violations}"
        )
    return EXIT_OK


@exit_on_error
def cmd_stats(args: argparse.Namespace) -> int:
    """Estadísticas de una traza JSONL generada por `stream`."""
    header, records = scheduler.read_trace(args.trace)
    cfg = DegradationConfig()
    if header is not None and "degradation" in header.config:
        cfg = DegradationConfig.model_validate(header.config["degradation"])
    stats = scheduler.trace_stats(records, cfg)
    logger.info(f"Comando stats: {stats.n_steps} pasos en {args.trace}")
    print(json.dumps(dataclasses.asdict(stats), indent=2, sort_keys=True))
    return EXIT_OK
