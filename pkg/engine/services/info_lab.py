# engine/services/info_lab.py
# -*- coding: utf-8 -*-

"""
Laboratorio de información exacto sobre alfabetos finitos pequeños.

Todas las cantidades se calculan por suma explícita sobre tablas de
probabilidad y en bits (log base 2). Convención de ejes de FiniteJoint:
p[s, k, x] (contexto S, modo de corrupción K, observación X).
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import product
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from engine.core.errors import AssumptionError, StochasticEncoderError

logger = logging.getLogger(__name__)

PMF_TOLERANCE = 1e-12
VIOLATION_TOLERANCE = 1e-9
IDENTITY_TOLERANCE = 1e-10
ALPHABET_SOFT_CAP = 8
EPSILON_DOMAIN_MAX = 0.5


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=np.float64)
    array.setflags(write=False)
    return array


# --- Tipos ---
@dataclass(frozen=True, eq=False)
class FiniteJoint:
    """
    pmf conjunta p(s,k,x). Las banderas `balanced` (p(k)=1/|K|) y
    `exogenous` (K⊥S) se verifican al construir, con tolerancia 1e-12.
    """
    p: np.ndarray
    balanced: bool = False
    exogenous: bool = False

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 3 or min(p.shape) < 1:
            raise AssumptionError(f"FiniteJoint requiere una tabla (|S|,|K|,|X|); recibido {p.shape}")
        _check_pmf(p, "FiniteJoint")
        if max(p.shape) > ALPHABET_SOFT_CAP:
            logger.warning(f"Alfabetos {p.shape} por encima de {ALPHABET_SOFT_CAP}: la suma exacta puede ser lenta")
        p_sk = p.sum(axis=2)
        p_s, p_k = p_sk.sum(axis=1), p_sk.sum(axis=0)
        if self.balanced and np.any(np.abs(p_k - 1.0 / p.shape[1]) > PMF_TOLERANCE):
            raise AssumptionError(f"Bandera 'balanced' activa pero p(k)={p_k} no es uniforme")
        if self.exogenous and np.any(np.abs(p_sk - np.outer(p_s, p_k)) > PMF_TOLERANCE):
            raise AssumptionError("Bandera 'exogenous' activa pero p(s,k) != p(s)p(k)")
        object.__setattr__(self, "p", _frozen(p))

    @classmethod
    def from_conditionals(cls, p_s: Sequence[float], p_x_given_sk: np.ndarray) -> "FiniteJoint":
        """p(s)·(1/|K|)·p(x|s,k): exógena y balanceada por construcción."""
        p_s = np.asarray(p_s, dtype=np.float64)
        cond = np.asarray(p_x_given_sk, dtype=np.float64)
        n_k = cond.shape[1]
        p = p_s[:, None, None] * (1.0 / n_k) * cond
        return cls(p, balanced=True, exogenous=True)

    @property
    def n_s(self) -> int:
        return int(self.p.shape[0])

    @property
    def n_k(self) -> int:
        return int(self.p.shape[1])

    @property
    def n_x(self) -> int:
        return int(self.p.shape[2])

    @property
    def p_s(self) -> np.ndarray:
        return self.p.sum(axis=(1, 2))


@dataclass(frozen=True)
class EncoderMap:
    """Encoder determinista X→Z y decoder opcional Z→X̂, como tablas totales."""
    encode: Tuple[int, ...]
    n_z: int
    decode: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        encode = tuple(int(z) for z in self.encode)
        if not encode:
            raise AssumptionError("El encoder debe cubrir un alfabeto no vacío")
        if any(z < 0 or z >= self.n_z for z in encode):
            raise AssumptionError(f"Encoder con valores fuera de [0,{self.n_z}): {encode}")
        object.__setattr__(self, "encode", encode)
        if self.decode is not None:
            decode = tuple(int(x) for x in self.decode)
            if len(decode) != self.n_z:
                raise AssumptionError(f"El decoder debe estar definido en los {self.n_z} valores de Z")
            if any(x < 0 or x >= len(encode) for x in decode):
                raise AssumptionError(f"Decoder con valores fuera de [0,{len(encode)}): {decode}")
            object.__setattr__(self, "decode", decode)

    @classmethod
    def identity(cls, n_x: int) -> "EncoderMap":
        return cls(tuple(range(n_x)), n_x, tuple(range(n_x)))

    @property
    def n_x(self) -> int:
        return len(self.encode)

    def reconstruct(self) -> Tuple[int, ...]:
        """x -> x̂ = g(f(x))."""
        if self.decode is None:
            raise AssumptionError("Se requiere un decoder Z→X̂")
        return tuple(self.decode[z] for z in self.encode)


@dataclass(frozen=True, eq=False)
class DistortionSpec:
    """Tabla d(x, x̂) ∈ [0,1] con la propiedad de discrepancia 1{x≠x̂} ≤ d(x,x̂)."""
    table: np.ndarray
    budget: float = EPSILON_DOMAIN_MAX

    def __post_init__(self) -> None:
        d = np.asarray(self.table, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise AssumptionError(f"La tabla de distorsión debe ser cuadrada; recibido {d.shape}")
        if np.any(d < 0.0) or np.any(d > 1.0):
            raise AssumptionError("Distorsión fuera de [0,1]")
        mismatch = 1.0 - np.eye(d.shape[0])
        if np.any(mismatch > d):
            raise AssumptionError("La distorsión no cumple 1{x≠x̂} ≤ d(x,x̂)")
        if not 0.0 < self.budget <= EPSILON_DOMAIN_MAX:
            raise AssumptionError(f"Presupuesto ε fuera de (0, 0.5]: {self.budget}")
        object.__setattr__(self, "table", _frozen(d))

    @classmethod
    def hamming(cls, n_x: int) -> "DistortionSpec":
        return cls(1.0 - np.eye(n_x))


@dataclass(frozen=True)
class ContaminationReport:
    I_XKgS: float
    I_ZKgS: float
    I_XhatKgS: float
    epsilon: float
    C_eps: float
    margin: float
    in_domain: bool
    violation: bool
    dpi_holds: bool
    mismatch_holds: bool
    within_budget: bool


@dataclass(frozen=True)
class FanoReport:
    identifiable: bool
    status: str
    bayes_error_per_s: Tuple[Optional[float], ...]
    I_XKgS_per_s: Tuple[Optional[float], ...]
    rhs_per_s: Tuple[Optional[float], ...]
    margin_per_s: Tuple[Optional[float], ...]
    I_XKgS: float
    holds: bool


@dataclass(frozen=True)
class AnchorReport:
    I_FKgY: float
    I_FY: float
    H_Y: float
    eta: float
    holds: bool


@dataclass(frozen=True)
class IBReport:
    I_ZX: float
    I_ZY: float
    I_ZXgY: float
    H_ZgY: float
    I_ZKgY: Optional[float]
    residual: float
    holds: bool
    notes: List[str] = field(default_factory=list)


# --- Entropías ---
def _check_pmf(p: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(p)):
        raise AssumptionError(f"{what}: masa no finita")
    if np.any(p < 0.0):
        raise AssumptionError(f"{what}: masa negativa")
    if abs(float(p.sum()) - 1.0) > PMF_TOLERANCE * max(1, p.size):
        raise AssumptionError(f"{what}: la masa suma {p.sum()!r}, no 1")


def entropy(pmf: Union[Sequence[float], np.ndarray]) -> float:
    """H en bits de una pmf de cualquier forma; 0·log0 := 0."""
    p = np.asarray(pmf, dtype=np.float64).ravel()
    _check_pmf(p, "entropy")
    nz = p[p > 0.0]
    return float(max(0.0, -np.sum(nz * np.log2(nz))))


def mutual_info(joint_ab: np.ndarray) -> float:
    """I(A;B) = H(A) + H(B) − H(A,B) para una tabla p(a,b)."""
    p = np.asarray(joint_ab, dtype=np.float64)
    value = entropy(p.sum(axis=1)) + entropy(p.sum(axis=0)) - entropy(p)
    return max(0.0, value)


def cond_mutual_info(joint_abc: np.ndarray) -> float:
    """I(A;B|C) = Σ p(a,b,c) log[p(a,b,c)p(c) / (p(a,c)p(b,c))], por suma directa."""
    p = np.asarray(joint_abc, dtype=np.float64)
    if p.ndim != 3:
        raise AssumptionError(f"cond_mutual_info requiere una tabla (A,B,C); recibido {p.shape}")
    _check_pmf(p, "cond_mutual_info")
    p_c = p.sum(axis=(0, 1))
    p_ac = p.sum(axis=1)
    p_bc = p.sum(axis=0)
    a, b, c = np.nonzero(p > 0.0)
    terms = p[a, b, c] * np.log2(p[a, b, c] * p_c[c] / (p_ac[a, c] * p_bc[b, c]))
    return float(max(0.0, terms.sum()))


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise AssumptionError(f"binary_entropy: p fuera de [0,1]: {p}")
    if p in (0.0, 1.0):
        return 0.0
    return float(-p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p))


def slack_c(epsilon: float, n_k: int) -> float:
    """C(ε) = ε·log2|K| + h(ε), ε ∈ [0, 0.5] (ε=0 por continuidad)."""
    if not 0.0 <= epsilon <= EPSILON_DOMAIN_MAX:
        raise AssumptionError(f"slack_c: ε fuera de (0, 0.5]: {epsilon}")
    if n_k < 1:
        raise AssumptionError(f"slack_c: |K| debe ser >= 1: {n_k}")
    return epsilon * math.log2(n_k) + binary_entropy(epsilon)


def fano_bound(p_e: float, n_k: int) -> float:
    """log2|K| − h(P_e) − P_e·log2(|K|−1)."""
    if not 0.0 <= p_e <= 1.0:
        raise AssumptionError(f"fano_bound: P_e fuera de [0,1]: {p_e}")
    tail = p_e * math.log2(n_k - 1) if n_k > 1 else 0.0
    return math.log2(n_k) - binary_entropy(p_e) - tail


# --- Push-forward ---
def push_forward(p: np.ndarray, mapping: Sequence[int], axis: int, size: int) -> np.ndarray:
    """Distribución de f(U) a lo largo de `axis`, conservando los demás ejes."""
    moved = np.moveaxis(np.asarray(p, dtype=np.float64), axis, 0)
    if len(mapping) != moved.shape[0]:
        raise AssumptionError(f"La función debe ser total: {len(mapping)} valores para un alfabeto de {moved.shape[0]}")
    out = np.zeros((size,) + moved.shape[1:])
    np.add.at(out, np.asarray(mapping, dtype=np.intp), moved)
    return np.moveaxis(out, 0, axis)


def _i_kgs(p_skv: np.ndarray) -> float:
    """I(V;K|S) para una tabla p(s,k,v)."""
    return cond_mutual_info(np.transpose(p_skv, (2, 1, 0)))


# --- Error de Bayes ---
def _conditional(joint: FiniteJoint, s: int) -> Tuple[np.ndarray, float]:
    if not 0 <= s < joint.n_s:
        raise AssumptionError(f"s={s} fuera del alfabeto |S|={joint.n_s}")
    mass = float(joint.p[s].sum())
    if mass <= 0.0:
        raise AssumptionError(f"p(s={s}) = 0: el error de Bayes condicional no está definido")
    return joint.p[s] / mass, mass


def bayes_error(joint: FiniteJoint, s: int) -> float:
    """P_e(s) = 1 − Σ_x max_k p(k,x|s)."""
    p_kx, _ = _conditional(joint, s)
    return float(min(1.0, max(0.0, 1.0 - p_kx.max(axis=0).sum())))


def brute_force_bayes_error(joint: FiniteJoint, s: int) -> float:
    """Mínimo error sobre todos los predictores φ: X→K (|K|^|X| candidatos)."""
    p_kx, _ = _conditional(joint, s)
    cols = np.arange(joint.n_x)
    best = 0.0
    for phi in product(range(joint.n_k), repeat=joint.n_x):
        best = max(best, float(p_kx[np.asarray(phi), cols].sum()))
    return float(min(1.0, max(0.0, 1.0 - best)))


# --- Verificaciones ---
def _require_assumptions(joint: FiniteJoint) -> None:
    if not (joint.balanced and joint.exogenous):
        raise AssumptionError("La cota requiere las banderas 'balanced' y 'exogenous' en la conjunta")


def check_contamination(joint: FiniteJoint, codec: EncoderMap, distortion: DistortionSpec) -> ContaminationReport:
    """
    I(Z;K|S) ≥ I(X;K|S) − C(min(ε, 1/2)) con ε = E[d(X, X̂)].
    Una violación solo cuenta dentro del dominio ε ≤ 1/2.
    """
    _require_assumptions(joint)
    if codec.n_x != joint.n_x or distortion.table.shape[0] != joint.n_x:
        raise AssumptionError(
            f"Alfabetos incompatibles: |X|={joint.n_x}, encoder={codec.n_x}, distorsión={distortion.table.shape}"
        )
    x_hat = codec.reconstruct()
    p = joint.p
    p_z = push_forward(p, codec.encode, axis=2, size=codec.n_z)
    p_xhat = push_forward(p, x_hat, axis=2, size=joint.n_x)

    i_x = _i_kgs(p)
    i_z = _i_kgs(p_z)
    i_xhat = _i_kgs(p_xhat)

    d_x = distortion.table[np.arange(joint.n_x), np.asarray(x_hat)]
    err_x = (np.arange(joint.n_x) != np.asarray(x_hat)).astype(np.float64)
    p_sx = p.sum(axis=1)
    epsilon = float(np.clip((p_sx * d_x).sum(), 0.0, 1.0))
    in_domain = epsilon <= EPSILON_DOMAIN_MAX
    c_eps = slack_c(min(epsilon, EPSILON_DOMAIN_MAX), joint.n_k)
    margin = i_z - (i_x - c_eps)

    mismatch_holds = True
    for s in range(joint.n_s):
        mass = p_sx[s].sum()
        if mass <= 0.0:
            continue
        pr_err = (p_sx[s] * err_x).sum() / mass
        e_d = (p_sx[s] * d_x).sum() / mass
        mismatch_holds &= bool(pr_err <= e_d + VIOLATION_TOLERANCE)

    report = ContaminationReport(
        I_XKgS=i_x,
        I_ZKgS=i_z,
        I_XhatKgS=i_xhat,
        epsilon=epsilon,
        C_eps=c_eps,
        margin=margin,
        in_domain=in_domain,
        violation=in_domain and margin < -VIOLATION_TOLERANCE,
        dpi_holds=i_z >= i_xhat - VIOLATION_TOLERANCE,
        mismatch_holds=mismatch_holds,
        within_budget=epsilon <= distortion.budget,
    )
    logger.debug(f"Contaminación: {report}")
    return report


def check_fano_positivity(joint: FiniteJoint) -> FanoReport:
    """
    Por cada s: I(X;K|S=s) ≥ log2|K| − h(P_e(s)) − P_e(s)·log2(|K|−1).
    Si algún P_e(s) alcanza 1 − 1/|K| la identificabilidad falla y se informa, sin error.
    """
    _require_assumptions(joint)
    floor = 1.0 - 1.0 / joint.n_k
    p_s = joint.p_s
    pes: List[Optional[float]] = []
    lhs: List[Optional[float]] = []
    rhs: List[Optional[float]] = []
    margins: List[Optional[float]] = []
    for s in range(joint.n_s):
        if p_s[s] <= 0.0:
            pes.append(None)
            lhs.append(None)
            rhs.append(None)
            margins.append(None)
            continue
        p_e = bayes_error(joint, s)
        i_s = mutual_info(joint.p[s] / p_s[s])
        bound = fano_bound(p_e, joint.n_k)
        pes.append(p_e)
        lhs.append(i_s)
        rhs.append(bound)
        margins.append(i_s - bound)

    i_avg = _i_kgs(joint.p)
    identifiable = all(pe is None or pe < floor - PMF_TOLERANCE for pe in pes)
    inequality = all(m is None or m >= -VIOLATION_TOLERANCE for m in margins)
    if identifiable:
        holds = inequality and i_avg > 0.0
        status = "ok" if holds else "violated"
    else:
        holds = inequality
        status = "identifiability fails"
    return FanoReport(
        identifiable=identifiable,
        status=status,
        bayes_error_per_s=tuple(pes),
        I_XKgS_per_s=tuple(lhs),
        rhs_per_s=tuple(rhs),
        margin_per_s=tuple(margins),
        I_XKgS=i_avg,
        holds=holds,
    )


def check_foreground_anchor(
    p_s: Sequence[float],
    h1: Sequence[int],
    h2: Sequence[int],
    p_k: Sequence[float],
) -> AnchorReport:
    """
    F = h1(S), Y = h2(S) y K independiente de S por construcción.
    I(F;K|Y) debe ser 0; I(F;Y) = H(Y) − η con η = H(Y|F).
    """
    p_s = np.asarray(p_s, dtype=np.float64)
    p_k = np.asarray(p_k, dtype=np.float64)
    _check_pmf(p_s, "p(s)")
    _check_pmf(p_k, "p(k)")
    if len(h1) != len(p_s) or len(h2) != len(p_s):
        raise AssumptionError("h1 y h2 deben estar definidas en todo el alfabeto de S")
    n_f, n_y = max(h1) + 1, max(h2) + 1
    p_sk = np.outer(p_s, p_k)
    # p(f, k, y): se acumula cada s en su celda (h1(s), ·, h2(s)).
    p_fky = np.zeros((n_f, len(p_k), n_y))
    for s in range(len(p_s)):
        p_fky[h1[s], :, h2[s]] += p_sk[s]
    p_fy = p_fky.sum(axis=1)
    i_fkgy = cond_mutual_info(p_fky)
    h_y = entropy(p_fy.sum(axis=0))
    eta = max(0.0, entropy(p_fy) - entropy(p_fy.sum(axis=1)))
    return AnchorReport(
        I_FKgY=i_fkgy,
        I_FY=mutual_info(p_fy),
        H_Y=h_y,
        eta=eta,
        holds=i_fkgy <= PMF_TOLERANCE,
    )


def _as_deterministic(encoder: Union[EncoderMap, np.ndarray], n_x: int) -> Tuple[Tuple[int, ...], int]:
    if isinstance(encoder, EncoderMap):
        if encoder.n_x != n_x:
            raise AssumptionError(f"Encoder definido en {encoder.n_x} valores; |X|={n_x}")
        return encoder.encode, encoder.n_z
    channel = np.asarray(encoder, dtype=np.float64)
    if channel.ndim != 2 or channel.shape[0] != n_x:
        raise AssumptionError(f"Canal q(z|x) debe ser ({n_x}, |Z|); recibido {channel.shape}")
    one_hot = np.all((np.abs(channel) <= PMF_TOLERANCE) | (np.abs(channel - 1.0) <= PMF_TOLERANCE), axis=1)
    if not np.all(one_hot) or np.any(np.abs(channel.sum(axis=1) - 1.0) > PMF_TOLERANCE):
        raise StochasticEncoderError("El encoder es estocástico: la descomposición exige H(Z|X)=0")
    return tuple(int(z) for z in channel.argmax(axis=1)), int(channel.shape[1])


def check_ib_decomposition(joint_xy: np.ndarray, encoder: Union[EncoderMap, np.ndarray]) -> IBReport:
    """
    Con Z = f(X) determinista: I(Z;X) = I(Z;Y) + I(Z;X|Y) e I(Z;X|Y) = H(Z|Y).
    Si la tabla trae un tercer eje K, además H(Z|Y) ≥ I(Z;K|Y) ≥ 0.
    """
    p = np.asarray(joint_xy, dtype=np.float64)
    if p.ndim == 2:
        p = p[..., None]
        has_k = False
    elif p.ndim == 3:
        has_k = True
    else:
        raise AssumptionError(f"Se esperaba una tabla p(x,y) o p(x,y,k); recibido {p.shape}")
    _check_pmf(p, "check_ib_decomposition")
    mapping, n_z = _as_deterministic(encoder, p.shape[0])

    # p(z, x, y, k) con masa solo en z = f(x).
    p_zxyk = np.zeros((n_z,) + p.shape)
    p_zxyk[np.asarray(mapping), np.arange(p.shape[0])] = p
    p_zxy = p_zxyk.sum(axis=3)
    p_zy = p_zxy.sum(axis=1)

    i_zx = mutual_info(p_zxy.sum(axis=2))
    i_zy = mutual_info(p_zy)
    i_zxgy = cond_mutual_info(p_zxy)
    h_zgy = max(0.0, entropy(p_zy) - entropy(p_zy.sum(axis=0)))
    residual = abs(i_zx - (i_zy + i_zxgy))

    notes: List[str] = []
    holds = residual <= IDENTITY_TOLERANCE
    if abs(i_zxgy - h_zgy) > IDENTITY_TOLERANCE:
        holds = False
        notes.append("I(Z;X|Y) != H(Z|Y)")
    i_zkgy: Optional[float] = None
    if has_k:
        i_zkgy = cond_mutual_info(np.transpose(p_zxyk.sum(axis=1), (0, 2, 1)))
        if i_zkgy > h_zgy + IDENTITY_TOLERANCE:
            holds = False
            notes.append("I(Z;K|Y) > H(Z|Y)")
    if residual > IDENTITY_TOLERANCE:
        notes.append(f"residuo de la regla de la cadena {residual:.3e}")
    return IBReport(
        I_ZX=i_zx,
        I_ZY=i_zy,
        I_ZXgY=i_zxgy,
        H_ZgY=h_zgy,
        I_ZKgY=i_zkgy,
        residual=residual,
        holds=holds,
        notes=notes,
    )
