# tests/services/test_info_lab.py
# -*- coding: utf-8 -*-

"""
Pruebas para el laboratorio de información exacto (engine/services/info_lab.py).
"""

import math

import numpy as np
import pytest

from engine.core.errors import AssumptionError, StochasticEncoderError
from engine.services import info_lab
from engine.services.info_lab import DistortionSpec, EncoderMap, FiniteJoint


# --- Funciones Auxiliares de Prueba ---

def random_pmf(gen: np.random.Generator, shape) -> np.ndarray:
    p = gen.dirichlet(np.ones(int(np.prod(shape))))
    return p.reshape(shape)


def x_equals_k_joint(n_s: int = 2, n_k: int = 4) -> FiniteJoint:
    """X = K exactamente, K uniforme e independiente de S."""
    cond = np.zeros((n_s, n_k, n_k))
    for k in range(n_k):
        cond[:, k, k] = 1.0
    return FiniteJoint.from_conditionals(np.full(n_s, 1.0 / n_s), cond)


def x_independent_joint(n_s: int = 2, n_k: int = 3, n_x: int = 3) -> FiniteJoint:
    """X independiente de K."""
    cond = np.full((n_s, n_k, n_x), 1.0 / n_x)
    return FiniteJoint.from_conditionals(np.full(n_s, 1.0 / n_s), cond)


def random_joint(gen: np.random.Generator, n_s: int, n_k: int, n_x: int) -> FiniteJoint:
    p_s = gen.dirichlet(np.ones(n_s))
    cond = gen.dirichlet(np.ones(n_x), size=(n_s, n_k))
    return FiniteJoint.from_conditionals(p_s, cond)


# --- Entropías ---

def test_entropy_examples():
    assert info_lab.entropy([0.5, 0.5]) == pytest.approx(1.0, abs=1e-12)
    assert info_lab.entropy([1.0, 0.0, 0.0]) == 0.0
    assert info_lab.entropy(np.full(7, 1 / 7)) == pytest.approx(math.log2(7), abs=1e-12)


def test_entropy_rejects_negative_mass():
    with pytest.raises(AssumptionError):
        info_lab.entropy([1.2, -0.2])


def test_cond_mutual_info_examples():
    gen = np.random.default_rng(0)
    # A ⊥ B | C por construcción.
    p_c = gen.dirichlet(np.ones(3))
    p_a_c = gen.dirichlet(np.ones(2), size=3)
    p_b_c = gen.dirichlet(np.ones(4), size=3)
    p = np.einsum("c,ca,cb->abc", p_c, p_a_c, p_b_c)
    assert info_lab.cond_mutual_info(p) == pytest.approx(0.0, abs=1e-12)
    # A = B uniforme sobre 4, C independiente.
    p = np.zeros((4, 4, 2))
    for a in range(4):
        p[a, a, :] = 1 / 8
    assert info_lab.cond_mutual_info(p) == pytest.approx(2.0, abs=1e-12)


def test_cond_mutual_info_chain_rule_cross_check():
    """I(A;BC) = I(A;C) + I(A;B|C) por dos caminos de suma independientes."""
    gen = np.random.default_rng(1)
    for _ in range(200):
        p = random_pmf(gen, (2, 2, 2))
        lhs = info_lab.mutual_info(p.reshape(2, 4))
        rhs = info_lab.mutual_info(p.sum(axis=1)) + info_lab.cond_mutual_info(p)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_binary_entropy_and_slack():
    assert info_lab.binary_entropy(0.5) == 1.0
    assert info_lab.slack_c(1e-9, 7) < 1e-6
    assert info_lab.slack_c(0.5, 7) == pytest.approx(0.5 * math.log2(7) + 1.0, abs=1e-12)
    assert info_lab.slack_c(0.0, 7) == 0.0
    with pytest.raises(AssumptionError):
        info_lab.binary_entropy(1.5)
    with pytest.raises(AssumptionError):
        info_lab.slack_c(0.6, 7)


# --- Tipos ---

def test_finite_joint_flags_are_checked():
    p = np.zeros((2, 2, 1))
    p[0, 0, 0] = 0.5
    p[1, 1, 0] = 0.5
    with pytest.raises(AssumptionError):
        FiniteJoint(p, exogenous=True)
    FiniteJoint(p, balanced=True)
    with pytest.raises(AssumptionError):
        FiniteJoint(np.full((2, 2, 2), 0.2))


def test_distortion_requires_mismatch_property():
    with pytest.raises(AssumptionError):
        DistortionSpec(np.full((3, 3), 0.5))
    assert DistortionSpec.hamming(3).table[0, 1] == 1.0


def test_encoder_map_must_be_total():
    with pytest.raises(AssumptionError):
        EncoderMap((0, 3), n_z=2)
    with pytest.raises(AssumptionError):
        EncoderMap((0, 1), n_z=2, decode=(0,))


def test_large_alphabet_warns(caplog):
    FiniteJoint(np.full((1, 1, 9), 1 / 9))
    assert "por encima de 8" in caplog.text


# --- Error de Bayes ---

def test_bayes_error_examples():
    assert info_lab.bayes_error(x_equals_k_joint(), 0) == pytest.approx(0.0, abs=1e-12)
    assert info_lab.bayes_error(x_independent_joint(n_k=3), 1) == pytest.approx(1 - 1 / 3, abs=1e-12)


def test_bayes_error_matches_brute_force():
    gen = np.random.default_rng(2)
    for _ in range(100):
        n_s, n_k, n_x = gen.integers(1, 5, size=3)
        joint = random_joint(gen, int(n_s), max(2, int(n_k)), int(n_x))
        for s in range(joint.n_s):
            assert info_lab.bayes_error(joint, s) == pytest.approx(
                info_lab.brute_force_bayes_error(joint, s), abs=1e-12
            )


def test_bayes_error_rejects_zero_mass_context():
    cond = np.full((2, 2, 2), 0.5)
    joint = FiniteJoint.from_conditionals([1.0, 0.0], cond)
    with pytest.raises(AssumptionError):
        info_lab.bayes_error(joint, 1)


# --- Contaminación ---

def test_identity_encoder_is_tight():
    gen = np.random.default_rng(3)
    joint = random_joint(gen, 3, 3, 4)
    report = info_lab.check_contamination(joint, EncoderMap.identity(4), DistortionSpec.hamming(4))
    assert report.epsilon == 0.0
    assert report.C_eps == 0.0
    assert report.I_ZKgS == pytest.approx(report.I_XKgS, abs=1e-12)
    assert report.margin == pytest.approx(0.0, abs=1e-12)
    assert not report.violation


def test_constant_encoder_still_satisfies_bound():
    joint = x_equals_k_joint(n_s=1, n_k=2)
    codec = EncoderMap((0, 0), n_z=1, decode=(0,))
    report = info_lab.check_contamination(joint, codec, DistortionSpec.hamming(2))
    assert report.I_ZKgS == 0.0
    assert report.epsilon == pytest.approx(0.5)
    assert report.margin >= 0.0
    assert report.dpi_holds and report.mismatch_holds


def test_random_instances_never_violate_bound():
    gen = np.random.default_rng(4)
    for _ in range(300):
        n_s, n_k, n_x = (int(v) for v in gen.integers(2, 5, size=3))
        joint = random_joint(gen, n_s, n_k, n_x)
        n_z = int(gen.integers(1, n_x + 1))
        codec = EncoderMap(tuple(gen.integers(0, n_z, size=n_x)), n_z, tuple(gen.integers(0, n_x, size=n_z)))
        report = info_lab.check_contamination(joint, codec, DistortionSpec.hamming(n_x))
        assert not report.violation
        assert report.dpi_holds
        assert report.mismatch_holds


def test_contamination_requires_assumption_flags():
    p = np.full((1, 2, 2), 0.25)
    with pytest.raises(AssumptionError):
        info_lab.check_contamination(FiniteJoint(p), EncoderMap.identity(2), DistortionSpec.hamming(2))


# --- Fano ---

def test_fano_equality_when_x_equals_k():
    report = info_lab.check_fano_positivity(x_equals_k_joint(n_k=4))
    assert report.identifiable
    for lhs, rhs in zip(report.I_XKgS_per_s, report.rhs_per_s):
        assert lhs == pytest.approx(2.0, abs=1e-12)
        assert rhs == pytest.approx(2.0, abs=1e-12)


def test_fano_rhs_vanishes_at_random_guess_floor():
    for n_k in (2, 3, 4, 7):
        assert info_lab.fano_bound(1 - 1 / n_k, n_k) == pytest.approx(0.0, abs=1e-12)


def test_fano_reports_identifiability_failure():
    report = info_lab.check_fano_positivity(x_independent_joint())
    assert not report.identifiable
    assert report.status == "identifiability fails"


# --- Ancla de primer plano ---

def test_foreground_anchor_examples():
    p_s = [0.1, 0.2, 0.3, 0.4]
    p_k = [0.25] * 4
    h2 = [0, 1, 1, 0]
    injective = info_lab.check_foreground_anchor(p_s, [0, 1, 2, 3], h2, p_k)
    assert injective.I_FKgY == pytest.approx(0.0, abs=1e-12)
    assert injective.eta == pytest.approx(0.0, abs=1e-12)
    assert injective.I_FY == pytest.approx(injective.H_Y, abs=1e-12)
    constant = info_lab.check_foreground_anchor(p_s, [0, 0, 0, 0], h2, p_k)
    assert constant.I_FY == pytest.approx(0.0, abs=1e-12)
    assert constant.eta == pytest.approx(constant.H_Y, abs=1e-12)


def test_foreground_anchor_random_constructions():
    gen = np.random.default_rng(5)
    for _ in range(1000):
        n_s = int(gen.integers(1, 6))
        p_s = gen.dirichlet(np.ones(n_s))
        p_k = gen.dirichlet(np.ones(int(gen.integers(1, 5))))
        h1 = gen.integers(0, 3, size=n_s)
        h2 = gen.integers(0, 3, size=n_s)
        report = info_lab.check_foreground_anchor(p_s, h1.tolist(), h2.tolist(), p_k)
        assert report.holds


# --- Descomposición IB ---

def test_ib_identity_and_constant_encoders():
    gen = np.random.default_rng(6)
    p_xy = random_pmf(gen, (3, 2))
    ident = info_lab.check_ib_decomposition(p_xy, EncoderMap.identity(3))
    assert ident.I_ZX == pytest.approx(info_lab.entropy(p_xy.sum(axis=1)), abs=1e-12)
    assert ident.holds
    const = info_lab.check_ib_decomposition(p_xy, EncoderMap((0, 0, 0), n_z=1))
    for value in (const.I_ZX, const.I_ZY, const.I_ZXgY):
        assert value == pytest.approx(0.0, abs=1e-12)


def test_ib_random_instances_hold():
    gen = np.random.default_rng(7)
    for _ in range(300):
        n_x, n_y, n_k = (int(v) for v in gen.integers(1, 5, size=3))
        p = random_pmf(gen, (n_x, n_y, n_k))
        n_z = int(gen.integers(1, n_x + 1))
        report = info_lab.check_ib_decomposition(p, EncoderMap(tuple(gen.integers(0, n_z, size=n_x)), n_z))
        assert report.residual <= 1e-10
        assert report.holds


def test_ib_accepts_one_hot_channel_and_rejects_stochastic():
    p_xy = np.full((2, 2), 0.25)
    report = info_lab.check_ib_decomposition(p_xy, np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert report.holds
    with pytest.raises(StochasticEncoderError):
        info_lab.check_ib_decomposition(p_xy, np.array([[0.5, 0.5], [1.0, 0.0]]))
