# tests/services/test_dataset_forge.py
# -*- coding: utf-8 -*-

"""
Pruebas para la generación del dataset pareado (engine/services/dataset_forge.py).
"""

from pathlib import Path

import numpy as np
import pytest

from engine.core.config import ArtifactHeader, ChromaKeyConfig, DegradationConfig, EngineConfig
from engine.core.errors import ConfigurationError, ImageIOError, ImageValidationError
from engine.core.image import Image8, write_png
from engine.core.modes import CorruptionMode
from engine.core.rng import RngStream
from engine.services import dataset_forge

TASK = "walker_walk"
BG = (0, 177, 64)
CHROMA = ChromaKeyConfig(reference=BG, tolerance=10)


# --- Funciones Auxiliares de Prueba ---

def make_pair(size: int = 84, seed: int = 0):
    """Cuadro limpio y su versión con fondo uniforme (agente en un cuadrado central)."""
    gen = np.random.default_rng(seed)
    clean = gen.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    uniform = np.empty_like(clean)
    uniform[...] = BG
    lo, hi = size // 4, 3 * size // 4
    uniform[lo:hi, lo:hi] = clean[lo:hi, lo:hi]
    uniform[lo:hi, lo:hi, 0] = 250
    return Image8(clean), Image8(uniform)


def make_root(tmp_path: Path, n_frames: int = 3, size: int = 84) -> Path:
    root = tmp_path / "renders"
    for i in range(n_frames):
        clean, uniform = make_pair(size, seed=i)
        write_png(clean, root / TASK / f"{i:03d}_clean.png")
        write_png(uniform, root / TASK / f"{i:03d}_uniformbg.png")
    return root


def make_header(seed: int = 5) -> ArtifactHeader:
    cfg = EngineConfig(chroma_keys={TASK: CHROMA})
    return ArtifactHeader(command="gen-dataset", seed=seed, config_hash=cfg.config_hash(), config={})


def generate(root: Path, out: Path, n: int = 25, jobs: int = 1, split_ratio: float = 0.9) -> Path:
    return dataset_forge.generate_dataset(
        root=root,
        tasks=[TASK],
        modes=[CorruptionMode.RAIN, CorruptionMode.JPEG],
        n_per_pair=n,
        split_ratio=split_ratio,
        seed=5,
        engine_config=EngineConfig(chroma_keys={TASK: CHROMA}),
        out_dir=out,
        header=make_header(),
        jobs=jobs,
    )


def tree_bytes(out: Path) -> dict:
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


# --- Chroma-key y muestras ---

def test_chroma_key_mask_marks_agent_only():
    _, uniform = make_pair(16)
    mask = dataset_forge.chroma_key_mask(uniform, CHROMA)
    assert mask.is_binary()
    assert mask.data[8, 8] == 1.0
    assert mask.data[0, 0] == 0.0
    assert mask.data.sum() == 64.0


def test_chroma_key_tolerance_is_chebyshev():
    img = Image8.constant(1, 1, (BG[0] + 10, BG[1] - 10, BG[2] + 10))
    assert dataset_forge.chroma_key_mask(img, CHROMA).data[0, 0] == 0.0
    img = Image8.constant(1, 1, (BG[0] + 11, BG[1], BG[2]))
    assert dataset_forge.chroma_key_mask(img, CHROMA).data[0, 0] == 1.0


def test_make_sample_composes_agent_on_black():
    clean, uniform = make_pair(32)
    rng = RngStream(3)
    sample = dataset_forge.make_sample(clean, uniform, CorruptionMode.HAZE, DegradationConfig(), rng, CHROMA)
    assert 0.54 - 1e-12 <= sample.severity <= 0.66 + 1e-12
    assert rng.counter == 1
    expected = clean.data * sample.mask.data[..., None].astype(np.uint8)
    np.testing.assert_array_equal(sample.agent_only.data, expected)


@pytest.mark.parametrize("mode", list(CorruptionMode))
def test_severity_draws_stay_in_jitter_band(mode):
    """10^4 extracciones de ι ~ U[0.9ῑ, 1.1ῑ] sin salir de la banda."""
    cfg = DegradationConfig()
    base = cfg.base_severity(mode)
    rng = RngStream(17)
    draws = np.array([dataset_forge.draw_severity(mode, cfg, rng) for _ in range(10_000)])
    assert draws.min() >= 0.9 * base - 1e-12
    assert draws.max() <= min(1.0, 1.1 * base) + 1e-12
    assert draws.mean() == pytest.approx(base, abs=0.01 * base + 1e-12)
    assert rng.counter == 10_000


def test_make_sample_severities_over_many_samples():
    clean, uniform = make_pair(8)
    rng = RngStream(4)
    base = DegradationConfig().base_severity(CorruptionMode.HAZE)
    severities = [
        dataset_forge.make_sample(clean, uniform, CorruptionMode.HAZE, DegradationConfig(), rng, CHROMA).severity
        for _ in range(10_000)
    ]
    assert 0.9 * base - 1e-12 <= min(severities)
    assert max(severities) <= 1.1 * base + 1e-12


def test_make_sample_rejects_shape_mismatch():
    clean, _ = make_pair(32)
    _, uniform = make_pair(16)
    with pytest.raises(ImageValidationError):
        dataset_forge.make_sample(clean, uniform, CorruptionMode.HAZE, DegradationConfig(), RngStream(0), CHROMA)


def test_split_fraction_over_many_assignments():
    rng = RngStream(99)
    splits = [dataset_forge.assign_split(rng, 0.9) for _ in range(5000)]
    assert splits.count("train") / 5000 == pytest.approx(0.9, abs=0.013)


def test_split_ratio_one_is_all_train():
    rng = RngStream(0)
    assert {dataset_forge.assign_split(rng, 1.0) for _ in range(200)} == {"train"}


# --- Descubrimiento de cuadros ---

def test_discover_frames_sorted(tmp_path):
    root = make_root(tmp_path, n_frames=3, size=8)
    assert dataset_forge.discover_frames(root, TASK) == ["000", "001", "002"]


def test_discover_frames_errors(tmp_path):
    with pytest.raises(ImageIOError):
        dataset_forge.discover_frames(tmp_path, "missing_task")
    root = make_root(tmp_path, n_frames=1, size=8)
    (root / TASK / "000_uniformbg.png").unlink()
    with pytest.raises(ImageIOError):
        dataset_forge.discover_frames(root, TASK)


# --- Generación completa ---

def test_generate_is_byte_identical_across_runs_and_jobs(tmp_path):
    root = make_root(tmp_path)
    a = generate(root, tmp_path / "a", jobs=1)
    b = generate(root, tmp_path / "b", jobs=1)
    c = generate(root, tmp_path / "c", jobs=2)
    assert tree_bytes(a.parent) == tree_bytes(b.parent) == tree_bytes(c.parent)


def test_generated_records_revalidate(tmp_path):
    root = make_root(tmp_path)
    manifest = generate(root, tmp_path / "out", n=6)
    header, records = dataset_forge.load_manifest(manifest)
    assert header.command == "gen-dataset"
    assert len(records) == 12
    assert {r.frame_idx for r in records} == {0, 1, 2}
    for record in records:
        dataset_forge.validate_record(manifest.parent, record)


def test_generate_zero_samples_writes_empty_manifest(tmp_path):
    manifest = generate(make_root(tmp_path), tmp_path / "out", n=0)
    header, records = dataset_forge.load_manifest(manifest)
    assert records == []
    assert header.seed == 5


def test_generate_requires_chroma_config(tmp_path):
    root = make_root(tmp_path, n_frames=1)
    with pytest.raises(ConfigurationError):
        dataset_forge.generate_dataset(
            root=root, tasks=[TASK], modes=[CorruptionMode.RAIN], n_per_pair=1, split_ratio=0.9,
            seed=0, engine_config=EngineConfig(), out_dir=tmp_path / "out", header=make_header(),
        )


def test_generate_rejects_wrong_frame_size(tmp_path):
    root = make_root(tmp_path, n_frames=1, size=32)
    with pytest.raises(ImageValidationError):
        generate(root, tmp_path / "out", n=1)


def test_validate_record_detects_tampering(tmp_path):
    manifest = generate(make_root(tmp_path), tmp_path / "out", n=1)
    _, records = dataset_forge.load_manifest(manifest)
    record = records[0]
    write_png(Image8.constant(84, 84, (255, 255, 255)), manifest.parent / record.agent_only)
    with pytest.raises(ImageValidationError):
        dataset_forge.validate_record(manifest.parent, record)
