# tests/services/test_scheduler.py
# -*- coding: utf-8 -*-

"""
Pruebas para el proceso de corrupción markoviano (engine/services/scheduler.py).
"""

import numpy as np
import pytest

from engine.core.config import ArtifactHeader, DegradationConfig
from engine.core.errors import ConfigurationError, SchedulerInvariantError
from engine.core.image import Image8
from engine.core.modes import CorruptionMode
from engine.core.rng import RngStream
from engine.services import degradations, scheduler


# --- Funciones Auxiliares de Prueba ---

def make_frames(n: int, size: int = 24) -> list:
    gen = np.random.default_rng(4)
    return [Image8(gen.integers(0, 256, size=(size, size, 3), dtype=np.uint8)) for _ in range(n)]


def make_header() -> ArtifactHeader:
    cfg = DegradationConfig()
    return ArtifactHeader(command="stream", seed=0, config_hash=cfg.config_hash(), config={})


@pytest.fixture(scope="module")
def long_trace_stats():
    trace = scheduler.run_schedule(200_000, scheduler.sticky_matrix(0.8), seed=2024)
    return scheduler.trace_stats(trace)


# --- Matriz y bandas ---

def test_sticky_matrix_values():
    pi = scheduler.sticky_matrix(0.8)
    assert pi.probs[0, 0] == pytest.approx(0.8)
    assert pi.probs[0, 1] == pytest.approx(0.2 / 6, abs=1e-12)
    np.testing.assert_allclose(pi.probs.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("p_s", [-0.1, 1.5])
def test_sticky_matrix_rejects_out_of_range(p_s):
    with pytest.raises(ConfigurationError):
        scheduler.sticky_matrix(p_s)


def test_transition_matrix_rows_must_sum_to_one():
    probs = np.eye(7)
    probs[0, 1] = 0.1
    with pytest.raises(ConfigurationError):
        scheduler.TransitionMatrix(probs)


@pytest.mark.parametrize("mode, low, high", [
    (CorruptionMode.RAIN, 0.54, 0.66),
    (CorruptionMode.MOTION_BLUR, 0.315, 0.385),
    (CorruptionMode.LOW_LIGHT, 0.63, 0.77),
])
def test_severity_bands(mode, low, high):
    band = scheduler.severity_band(mode)
    assert band.low == pytest.approx(low, abs=1e-12)
    assert band.high == pytest.approx(high, abs=1e-12)


def test_band_floor_applies_to_small_base_severity():
    cfg = DegradationConfig(base_severities={"jpeg": 0.1})
    band = scheduler.severity_band(CorruptionMode.JPEG, cfg)
    assert band.low == pytest.approx(0.1)


# --- Pasos ---

def test_initial_state_draws_two_values():
    rng = RngStream(1)
    state = scheduler.initial_state(rng)
    assert rng.counter == 2
    assert scheduler.severity_band(state.mode).contains(state.severity)


def test_step_draws_exactly_two_values():
    rng = RngStream(1)
    state = scheduler.initial_state(rng)
    pi = scheduler.sticky_matrix(0.8)
    for t in range(1, 50):
        before = rng.counter
        state = scheduler.step(state, pi)
        assert rng.counter - before == 2
        assert state.step == t


def test_mode_switch_redraws_severity_uniformly_in_new_band():
    """Con p_s = 0 cada paso cambia de modo y ι se re-muestrea en la banda del modo nuevo."""
    rng = RngStream(42)
    state = scheduler.initial_state(rng, mode=CorruptionMode.RAIN)
    pi = scheduler.sticky_matrix(0.0)
    positions = []
    for _ in range(400):
        replay = rng.copy()
        replay.uniform()
        u = replay.uniform()
        new_state = scheduler.step(state, pi)
        assert new_state.mode != state.mode
        band = scheduler.severity_band(new_state.mode)
        assert new_state.severity == band.clip(band.low + u * (band.high - band.low))
        positions.append((new_state.severity - band.low) / (band.high - band.low))
        state = new_state
    assert np.mean(positions) == pytest.approx(0.5, abs=0.06)


def test_band_check_rejects_out_of_band_severity():
    with pytest.raises(SchedulerInvariantError):
        scheduler._check_band(CorruptionMode.RAIN, 0.1, DegradationConfig())


def test_identity_matrix_keeps_single_mode():
    trace = scheduler.run_schedule(300, scheduler.sticky_matrix(1.0), seed=8)
    assert len({r.mode_code for r in trace}) == 1


def test_schedule_severity_stays_in_band():
    trace = scheduler.run_schedule(5000, scheduler.sticky_matrix(0.8), seed=3)
    for r in trace:
        band = scheduler.severity_band(CorruptionMode(r.mode_code))
        assert band.low <= r.severity <= band.high


def test_rng_counter_before_advances_by_two():
    trace = scheduler.run_schedule(10, scheduler.sticky_matrix(0.8), seed=3)
    counters = [r.rng_counter_before for r in trace]
    assert counters[0] == 0
    assert all(b - a == 2 for a, b in zip(counters[1:], counters[2:]))


# --- Estadísticas de la cadena ---

def test_self_transition_rate(long_trace_stats):
    assert long_trace_stats.self_transition_rate == pytest.approx(0.8, abs=0.01)


def test_mode_marginals(long_trace_stats):
    for value in long_trace_stats.mode_marginals.values():
        assert value == pytest.approx(1 / 7, abs=0.01)


def test_mean_segment_length(long_trace_stats):
    assert long_trace_stats.mean_segment_length == pytest.approx(5.0, abs=0.25)


def test_single_step_stats():
    stats = scheduler.trace_stats(scheduler.run_schedule(1, scheduler.sticky_matrix(0.8), seed=0))
    assert stats.n_steps == 1
    assert stats.self_transition_rate is None
    assert stats.mean_segment_length == 1.0


# --- Secuencias de cuadros ---

def test_pinned_haze_stream_matches_operator():
    frames = make_frames(1)
    steps = scheduler.corrupt_stream(
        frames, scheduler.sticky_matrix(1.0), mode=CorruptionMode.HAZE, severity=0.3,
    )
    assert steps[0].frame == degradations.haze(frames[0], 0.3)


def test_stream_prefix_is_causal():
    """La salida t no depende de cuadros posteriores."""
    frames = make_frames(6)
    pi = scheduler.sticky_matrix(0.8)
    full = scheduler.corrupt_stream(frames, pi, seed=77)
    prefix = scheduler.corrupt_stream(frames[:3], pi, seed=77)
    for a, b in zip(prefix, full):
        assert a.frame == b.frame
        assert a.mode == b.mode


def test_stream_identical_for_any_job_count():
    frames = make_frames(6)
    pi = scheduler.sticky_matrix(0.5)
    serial = scheduler.corrupt_stream(frames, pi, seed=12, jobs=1)
    parallel = scheduler.corrupt_stream(frames, pi, seed=12, jobs=2)
    assert [s.frame for s in serial] == [s.frame for s in parallel]


def test_stream_rejects_empty_input():
    with pytest.raises(ConfigurationError):
        scheduler.corrupt_stream([], scheduler.sticky_matrix(0.8))


# --- Traza JSONL ---

def test_trace_roundtrip(tmp_path):
    trace = scheduler.run_schedule(20, scheduler.sticky_matrix(0.8), seed=1)
    path = scheduler.write_trace(trace, tmp_path / "trace.jsonl", header=make_header())
    header, records = scheduler.read_trace(path)
    assert header is not None and header.command == "stream"
    assert records == trace


def test_read_trace_rejects_malformed(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"step": 0, "mode_code": 1, "mode_name": "snow", "severity": 0.5, "rng_counter_before": 0}\n')
    with pytest.raises(ConfigurationError):
        scheduler.read_trace(path)
    path.write_text("not json\n")
    with pytest.raises(ConfigurationError):
        scheduler.read_trace(path)
