# engine/services/theory_sweep.py
# -*- coding: utf-8 -*-

"""
Barrido aleatorio de instancias finitas para `verify-theory`.

Cada instancia i usa el sub-flujo derive(seed, "theory", i), de modo que
el resultado no depende del número de workers ni del orden de ejecución.
Construcción (sin rechazo): p(s) ~ Dirichlet, p(k) = 1/|K|, filas
p(x|s,k) ~ Dirichlet; así las banderas exógena y balanceada son válidas.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from engine.core.config import ArtifactHeader
from engine.core.errors import ConfigurationError, ImageIOError
from engine.core.rng import RngStream
from engine.services import info_lab
from engine.services.info_lab import DistortionSpec, EncoderMap, FiniteJoint

logger = logging.getLogger(__name__)

DEFAULT_INSTANCES = 1000
DEFAULT_MAX_ALPHABET = 4
_DIAGONAL_MAX = 0.25
ENCODER_VARIANTS = ("identity", "perturbed", "random")


# --- Tipos ---
@dataclass(frozen=True, eq=False)
class TheoryInstance:
    instance_id: int
    variant: str
    joint: FiniteJoint
    codec: EncoderMap
    distortion: DistortionSpec
    h1: Tuple[int, ...]
    h2: Tuple[int, ...]


class TheoryReport(BaseModel):
    instance_id: int
    variant: str
    alphabet: Tuple[int, int, int]
    I_XKgS: float
    I_ZKgS: float
    I_XhatKgS: float
    epsilon: float
    C_eps: float
    margin: float
    in_domain: bool
    fano_status: str
    fano_margin_per_s: List[Optional[float]]
    I_FKgY: float
    eta: float
    ib_residual: float
    violations: int
    failed_checks: List[str]


class TheorySummary(BaseModel):
    summary: bool = True
    instances: int
    violations: int
    instances_with_violations: List[int]
    out_of_domain: int
    not_identifiable: int
    min_margin: Optional[float]


# --- Generación ---
def _dirichlet(rng: RngStream, n: int) -> np.ndarray:
    """Dirichlet(1,…,1) como exponenciales normalizadas; n extracciones."""
    e = -np.log1p(-rng.uniforms(n))
    total = e.sum()
    if total <= 0.0:
        return np.full(n, 1.0 / n)
    return e / total


def _randint(rng: RngStream, low: int, high: int) -> int:
    """Entero uniforme en [low, high]."""
    return min(high, low + int(rng.uniform() * (high - low + 1)))


def random_instance(seed: int, instance_id: int, max_alphabet: int = DEFAULT_MAX_ALPHABET) -> TheoryInstance:
    if max_alphabet < 2:
        raise ConfigurationError(f"max_alphabet debe ser >= 2: {max_alphabet}")
    rng = RngStream(seed).spawn("theory", instance_id)
    n_s = _randint(rng, 1, max_alphabet)
    n_k = _randint(rng, 2, max_alphabet)
    n_x = _randint(rng, 2, max_alphabet)

    p_s = _dirichlet(rng, n_s)
    cond = np.stack([
        np.stack([_dirichlet(rng, n_x) for _ in range(n_k)]) for _ in range(n_s)
    ])
    joint = FiniteJoint.from_conditionals(p_s, cond)

    variant = ENCODER_VARIANTS[instance_id % len(ENCODER_VARIANTS)]
    if variant == "identity":
        codec = EncoderMap.identity(n_x)
        table = 1.0 - np.eye(n_x)
    else:
        if variant == "perturbed":
            encode = list(range(n_x))
            encode[_randint(rng, 0, n_x - 1)] = _randint(rng, 0, n_x - 1)
            n_z = n_x
            decode = tuple(range(n_x))
        else:
            n_z = _randint(rng, 1, n_x)
            encode = [_randint(rng, 0, n_z - 1) for _ in range(n_x)]
            decode = tuple(_randint(rng, 0, n_x - 1) for _ in range(n_z))
        codec = EncoderMap(tuple(encode), n_z, decode)
        table = 1.0 - np.eye(n_x) + np.diag(rng.uniforms(n_x) * _DIAGONAL_MAX)

    n_f = _randint(rng, 1, n_s)
    n_y = _randint(rng, 1, n_s)
    h1 = tuple(_randint(rng, 0, n_f - 1) for _ in range(n_s))
    h2 = tuple(_randint(rng, 0, n_y - 1) for _ in range(n_s))
    return TheoryInstance(
        instance_id=instance_id,
        variant=variant,
        joint=joint,
        codec=codec,
        distortion=DistortionSpec(table),
        h1=h1,
        h2=h2,
    )


# --- Verificación ---
def evaluate_instance(instance: TheoryInstance) -> TheoryReport:
    joint = instance.joint
    contamination = info_lab.check_contamination(joint, instance.codec, instance.distortion)
    fano = info_lab.check_fano_positivity(joint)
    p_k = np.full(joint.n_k, 1.0 / joint.n_k)
    anchor = info_lab.check_foreground_anchor(joint.p_s, instance.h1, instance.h2, p_k)
    # IB con Y = S y el modo K como tercer eje: tabla p(x, s, k).
    ib = info_lab.check_ib_decomposition(np.transpose(joint.p, (2, 0, 1)), instance.codec)

    failed: List[str] = []
    if contamination.violation:
        failed.append("contamination")
    if not contamination.dpi_holds:
        failed.append("dpi")
    if not contamination.mismatch_holds:
        failed.append("mismatch")
    if fano.identifiable and not fano.holds:
        failed.append("fano")
    if not anchor.holds:
        failed.append("foreground_anchor")
    if not ib.holds:
        failed.append("ib_decomposition")

    return TheoryReport(
        instance_id=instance.instance_id,
        variant=instance.variant,
        alphabet=(joint.n_s, joint.n_k, joint.n_x),
        I_XKgS=contamination.I_XKgS,
        I_ZKgS=contamination.I_ZKgS,
        I_XhatKgS=contamination.I_XhatKgS,
        epsilon=contamination.epsilon,
        C_eps=contamination.C_eps,
        margin=contamination.margin,
        in_domain=contamination.in_domain,
        fano_status=fano.status,
        fano_margin_per_s=list(fano.margin_per_s),
        I_FKgY=anchor.I_FKgY,
        eta=anchor.eta,
        ib_residual=ib.residual,
        violations=len(failed),
        failed_checks=failed,
    )


def run_instance(seed: int, instance_id: int, max_alphabet: int = DEFAULT_MAX_ALPHABET) -> TheoryReport:
    return evaluate_instance(random_instance(seed, instance_id, max_alphabet))


def _run_instance_args(args: Tuple[int, int, int]) -> TheoryReport:
    return run_instance(*args)


def run_sweep(
    seed: int,
    n_instances: int = DEFAULT_INSTANCES,
    max_alphabet: int = DEFAULT_MAX_ALPHABET,
    jobs: int = 1,
    only_instance: Optional[int] = None,
) -> List[TheoryReport]:
    if n_instances < 0:
        raise ConfigurationError(f"El número de instancias debe ser >= 0: {n_instances}")
    if only_instance is not None:
        ids: Sequence[int] = [only_instance]
    else:
        ids = range(n_instances)
    work = [(seed, i, max_alphabet) for i in ids]
    logger.info(f"Verificando {len(work)} instancias (|alfabeto| ≤ {max_alphabet}, jobs={jobs})")
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_instance_args, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        reports = [_run_instance_args(w) for w in work]
    for report in reports:
        if report.violations:
            logger.error(f"Instancia {report.instance_id}: fallan {report.failed_checks}")
    return reports


def summarize(reports: Sequence[TheoryReport]) -> TheorySummary:
    in_domain = [r.margin for r in reports if r.in_domain]
    return TheorySummary(
        instances=len(reports),
        violations=sum(r.violations for r in reports),
        instances_with_violations=[r.instance_id for r in reports if r.violations],
        out_of_domain=sum(1 for r in reports if not r.in_domain),
        not_identifiable=sum(1 for r in reports if r.fano_status == "identifiability fails"),
        min_margin=min(in_domain) if in_domain else None,
    )


def write_report(
    path: Union[str, Path],
    header: ArtifactHeader,
    reports: Iterable[TheoryReport],
    summary: TheorySummary,
) -> Path:
    """JSONL: cabecera, una línea por instancia y una línea final de resumen."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(header.model_dump_json() + "\n")
            for report in reports:
                fh.write(report.model_dump_json() + "\n")
            fh.write(summary.model_dump_json() + "\n")
    except OSError as e:
        raise ImageIOError(f"No se pudo escribir el reporte {path}: {e}") from e
    return path


def dump_instance(seed: int, instance_id: int, max_alphabet: int = DEFAULT_MAX_ALPHABET) -> Dict[str, Any]:
    """Tablas completas de una instancia, para reproducirla o inspeccionarla."""
    inst = random_instance(seed, instance_id, max_alphabet)
    return {
        "seed": seed,
        "instance_id": instance_id,
        "max_alphabet": max_alphabet,
        "variant": inst.variant,
        "joint": inst.joint.p.tolist(),
        "encoder": list(inst.codec.encode),
        "n_z": inst.codec.n_z,
        "decoder": list(inst.codec.decode or ()),
        "distortion": inst.distortion.table.tolist(),
        "h1": list(inst.h1),
        "h2": list(inst.h2),
    }


def write_instance_dump(path: Union[str, Path], dump: Dict[str, Any]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(dump, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as e:
        raise ImageIOError(f"No se pudo escribir {path}: {e}") from e
    return path
