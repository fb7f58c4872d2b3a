"""Weighted k-XOR and predicate CSP instances, their reductions to 2-XOR multigraphs,
and the refutation pipeline built on the 2-XOR certificate.

Keys are ordered multisets S in [n]^k encoded base n, most significant digit first.
An assignment bitmask ``a`` means x_i = -1 exactly when bit i of ``a`` is set.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import config
from .certifier import SpectralPremiseError, certify_2xor
from .graph import SignedGraph, build_graph, operator_radius, walk_operator
from .schemas import (
    AlphaBound,
    InstanceModel,
    PredicateRefutationReport,
    RefutationReport,
    TailCheck,
    WeightSpec,
    WeightStats,
)
from .utils import child_rng, decode_array, encode, masks_from_digits, parity

logger = logging.getLogger(__name__)

KEY_BITS_MAX = 48


# ---------------------------------------------------------------- instances

@dataclass(frozen=True, eq=False)
class XorInstance:
    """Objective sum_S b_S x^S over integer weights; codes sorted, no zero weights."""

    n: int
    k: int
    codes: np.ndarray
    weights: np.ndarray
    seed: Optional[int] = None

    @property
    def m_abs(self) -> int:
        return int(np.abs(self.weights).sum())

    @property
    def num_terms(self) -> int:
        return int(self.codes.size)

    @property
    def terms(self) -> Dict[Tuple[int, ...], int]:
        return {tuple(int(d) for d in row): int(w) for row, w in zip(self.digits(), self.weights)}

    def digits(self) -> np.ndarray:
        return decode_array(self.codes, self.n, self.k)

    def masks(self) -> np.ndarray:
        return masks_from_digits(self.digits())

    def to_model(self) -> InstanceModel:
        return InstanceModel(
            n=self.n,
            k=self.k,
            terms=[(row.tolist(), int(w)) for row, w in zip(self.digits(), self.weights)],
            seed=self.seed,
        )


def xor_instance(n: int, k: int, terms: Union[Dict[Sequence[int], int], Sequence[Tuple[Sequence[int], int]]],
                 seed: Optional[int] = None) -> XorInstance:
    """Build an instance from (S, weight) pairs; repeated keys add up and zeros drop out."""
    if n < 1 or k < 0:
        raise ValueError(f"need n >= 1 and k >= 0, got n={n}, k={k}")
    items = terms.items() if isinstance(terms, dict) else terms
    acc: Dict[int, int] = {}
    for key, w in items:
        key = [int(i) for i in key]
        if len(key) != k:
            raise ValueError(f"term {key} does not have arity {k}")
        if any(not 0 <= i < n for i in key):
            raise ValueError(f"term {key} has a variable outside [0, {n})")
        if int(w) != w:
            raise ValueError(f"weight {w!r} of term {key} is not an integer")
        code = encode(key, n)
        acc[code] = acc.get(code, 0) + int(w)
    return _from_code_map(n, k, acc, seed)


def _from_code_map(n: int, k: int, acc: Dict[int, int], seed: Optional[int] = None) -> XorInstance:
    codes = np.array(sorted(c for c, w in acc.items() if w != 0), dtype=np.int64)
    weights = np.array([acc[int(c)] for c in codes], dtype=np.int64)
    return XorInstance(n=n, k=k, codes=codes, weights=weights, seed=seed)


def _from_arrays(n: int, k: int, codes: np.ndarray, weights: np.ndarray, seed: Optional[int] = None) -> XorInstance:
    codes = np.asarray(codes, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.int64)
    if codes.size == 0:
        return XorInstance(n, k, codes, weights, seed)
    uniq, inverse = np.unique(codes, return_inverse=True)
    merged = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(merged, inverse, weights)
    keep = merged != 0
    return XorInstance(n, k, uniq[keep], merged[keep], seed)


@dataclass(frozen=True, eq=False)
class CspInstance:
    n: int
    k: int
    predicate: Tuple[int, ...]
    codes: np.ndarray
    zeta: np.ndarray
    p: Optional[float] = None
    seed: Optional[int] = None

    @property
    def m(self) -> int:
        return int(self.codes.size)

    @property
    def expected_m(self) -> Optional[float]:
        return None if self.p is None else self.p * float(self.n) ** self.k

    def digits(self) -> np.ndarray:
        return decode_array(self.codes, self.n, self.k)

    def to_model(self) -> InstanceModel:
        return InstanceModel(
            n=self.n,
            k=self.k,
            predicate="".join(str(b) for b in self.predicate),
            clauses=[(row.tolist(), z.tolist()) for row, z in zip(self.digits(), self.zeta)],
            p=self.p,
            seed=self.seed,
        )


def parse_predicate(predicate: Union[str, Sequence[int]], k: int) -> Tuple[int, ...]:
    table = tuple(int(c) for c in predicate)
    if len(table) != 2 ** k or any(b not in (0, 1) for b in table):
        raise ValueError(f"predicate must be a 0/1 table of length 2^k = {2 ** k}")
    return table


def csp_instance(
    n: int,
    k: int,
    predicate: Union[str, Sequence[int]],
    clauses: Sequence[Tuple[Sequence[int], Sequence[int]]],
    p: Optional[float] = None,
    seed: Optional[int] = None,
) -> CspInstance:
    table = parse_predicate(predicate, k)
    codes: List[int] = []
    zetas: List[List[int]] = []
    for key, z in clauses:
        key = [int(i) for i in key]
        z = [int(s) for s in z]
        if len(key) != k or len(z) != k:
            raise ValueError(f"clause {key} / {z} does not have arity {k}")
        if any(not 0 <= i < n for i in key):
            raise ValueError(f"clause {key} has a variable outside [0, {n})")
        if any(s not in (1, -1) for s in z):
            raise ValueError(f"clause signs {z} must be +1 or -1")
        codes.append(encode(key, n))
        zetas.append(z)
    order = np.argsort(np.asarray(codes, dtype=np.int64), kind="stable")
    codes_a = np.asarray(codes, dtype=np.int64)[order]
    zeta_a = np.asarray(zetas, dtype=np.int64).reshape(-1, k)[order]
    return CspInstance(n, k, table, codes_a, zeta_a, p=p, seed=seed)


def instance_from_model(model: InstanceModel) -> Union[XorInstance, CspInstance]:
    if model.clauses is not None:
        return csp_instance(model.n, model.k, model.predicate, model.clauses, p=model.p, seed=model.seed)
    return xor_instance(model.n, model.k, model.terms, seed=model.seed)


def _bits(x: Union[int, Sequence[int]], n: int) -> int:
    if n > 62:
        raise ValueError(f"assignments are bitmasks; n = {n} exceeds 62 variables")
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = list(x)
    if len(x) != n or any(v not in (1, -1) for v in x):
        raise ValueError(f"assignment must be {n} values in {{+1, -1}}")
    return sum(1 << i for i, v in enumerate(x) if v == -1)


def xor_value(I: XorInstance, x: Union[int, Sequence[int]]) -> int:
    """sum_S b_S x^S for an assignment given as +-1 values or a bitmask."""
    a = _bits(x, I.n)
    if I.num_terms == 0:
        return 0
    signs = 1 - 2 * parity(I.masks() & a)
    return int((signs * I.weights).sum())


def clause_satisfied(I: CspInstance, x: Union[int, Sequence[int]]) -> np.ndarray:
    a = _bits(x, I.n)
    digits = I.digits()
    neg_x = (a >> digits) & 1
    neg_z = (neg_x ^ (I.zeta == -1)).astype(np.int64)
    index = (neg_z << np.arange(I.k)).sum(axis=1)
    return np.asarray(I.predicate, dtype=np.int64)[index]


def instance_objective(I: Union[XorInstance, CspInstance], x: Union[int, Sequence[int]]) -> Fraction:
    if isinstance(I, CspInstance):
        if I.m == 0:
            return Fraction(0)
        return Fraction(int(clause_satisfied(I, x).sum()), I.m)
    m = I.m_abs
    if m == 0:
        return Fraction(1, 2)
    return Fraction(m + xor_value(I, x), 2 * m)


# ---------------------------------------------------------------- reductions

@dataclass(frozen=True)
class FlatMap:
    """y_T = x^T for T in [n]^q; flat variable id = code of T."""

    n: int
    q: int

    @property
    def size(self) -> int:
        return self.n ** self.q

    def pullback(self, x: Sequence[int]) -> np.ndarray:
        return monomials(x, self.n, self.q)


@dataclass(frozen=True, eq=False)
class LiftMap:
    """y side: x^S for S in [n]^{q+1}; z side: x^T w_i for (T, i), offset n^{q+1}."""

    n: int
    q: int
    chosen: np.ndarray = field(repr=False)

    @property
    def side(self) -> int:
        return self.n ** (self.q + 1)

    @property
    def size(self) -> int:
        return 2 * self.side

    def pullback(self, x: Sequence[int], w: Optional[Sequence[int]] = None) -> np.ndarray:
        y = monomials(x, self.n, self.q + 1)
        t = monomials(x, self.n, self.q)
        w = np.ones(self.n, dtype=np.int64) if w is None else np.asarray(w, dtype=np.int64)
        z = (t[:, None] * w[None, :]).ravel()
        return np.concatenate([y, z])


def monomials(x: Sequence[int], n: int, length: int) -> np.ndarray:
    """x^T for every T in [n]^length, indexed by code."""
    x = np.asarray(x, dtype=np.int64)
    if x.size != n:
        raise ValueError(f"assignment must have {n} entries")
    out = np.ones(1, dtype=np.int64)
    for _ in range(length):
        out = (out[:, None] * x[None, :]).ravel()
    return out


def flatten_even(I: XorInstance) -> Tuple[XorInstance, FlatMap]:
    if I.k % 2 or I.k == 0:
        raise ValueError(f"flattening needs a positive even arity, got k={I.k}")
    q = I.k // 2
    # code(S) = code(first half) * n^q + code(second half): the codes are already flat pairs
    flat = XorInstance(n=I.n ** q, k=2, codes=I.codes.copy(), weights=I.weights.copy(), seed=I.seed)
    return flat, FlatMap(I.n, q)


def lift_odd(I: XorInstance, seed: int = 0) -> Tuple[XorInstance, LiftMap]:
    if I.k % 2 == 0:
        raise ValueError(f"lifting needs an odd arity, got k={I.k}")
    if I.k == 1:
        raise ValueError("arity-1 terms have no lift; bound them with the L1 estimate (|alpha| = 1 route)")
    n, q = I.n, I.k // 2
    if 4 * (n ** (q + 1)) ** 2 > 2 ** 62:
        raise ValueError(f"lifted key space for n={n}, k={I.k} does not fit in 62 bits")
    chosen = child_rng(seed, 0).integers(0, n, size=I.num_terms)
    side = n ** (q + 1)
    # y = first q+1 digits; z = (last q digits, i_U)
    y = I.codes // n ** q
    z = (I.codes % n ** q) * n + chosen
    lifted = _from_arrays(2 * side, 2, y * (2 * side) + side + z, I.weights, seed=I.seed)
    return lifted, LiftMap(n, q, chosen)


@dataclass(frozen=True, eq=False)
class XorGraph:
    graph: Optional[SignedGraph]
    vertices: np.ndarray
    m_abs: int

    @property
    def vol(self) -> int:
        return 0 if self.graph is None else self.graph.vol

    @property
    def scale(self) -> float:
        """vol / 2m: the factor between <x, K-bar x>_pi and the normalised XOR advantage."""
        return 0.0 if self.m_abs == 0 else self.vol / (2 * self.m_abs)


def xor_graph(I2: XorInstance) -> XorGraph:
    """Signed multigraph of an arity-2 instance: |b_ij + b_ji| parallel edges (2|b_ii| loop units)."""
    if I2.k != 2:
        raise ValueError(f"xor_graph needs arity 2, got k={I2.k}")
    N = I2.n
    i, j = np.divmod(I2.codes, N)
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    val = np.where(i == j, 2 * I2.weights, I2.weights)
    pair_codes = lo * N + hi
    if pair_codes.size:
        uniq, inverse = np.unique(pair_codes, return_inverse=True)
        merged = np.zeros(uniq.size, dtype=np.int64)
        np.add.at(merged, inverse, val)
        keep = merged != 0
        uniq, merged = uniq[keep], merged[keep]
    else:
        uniq = merged = np.zeros(0, dtype=np.int64)
    if uniq.size == 0:
        return XorGraph(None, np.zeros(0, dtype=np.int64), I2.m_abs)
    u, v = np.divmod(uniq, N)
    vertices = np.unique(np.concatenate([u, v]))
    lu = np.searchsorted(vertices, u)
    lv = np.searchsorted(vertices, v)
    edges = [(int(a), int(b), int(abs(w)), 1 if w > 0 else -1) for a, b, w in zip(lu, lv, merged)]
    return XorGraph(build_graph(edges, n=int(vertices.size)), vertices, I2.m_abs)


def xor_from_graph(G: SignedGraph, unit: bool = False) -> XorInstance:
    """Arity-2 instance with the same objective as ``G``; ``unit`` keeps one +-1 term per vertex pair."""
    acc: Dict[int, int] = {}
    for u, v, m, s in G.edges:
        if unit:
            if u == v:
                continue
            acc[u * G.n + v] = s
        elif u == v:
            acc[u * G.n + u] = m * s
        else:
            acc[u * G.n + v] = m * s
            acc[v * G.n + u] = m * s
    return _from_code_map(G.n, 2, acc)


def reduce_to_pairs(I: XorInstance, seed: int = 0) -> Tuple[XorInstance, str, int]:
    """(arity-2 instance, reduction name, round factor)."""
    if I.k == 2:
        return I, "identity", 1
    if I.k % 2 == 0:
        flat, _ = flatten_even(I)
        return flat, "flatten", I.k // 2
    lifted, _ = lift_odd(I, seed=seed)
    return lifted, "lift", I.k // 2 + 1


def weight_moments(I: XorInstance) -> Tuple[float, float, int]:
    """(sigma^2, E|w|, max |w|) over the whole key space [n]^k."""
    space = float(I.n) ** I.k
    w = I.weights.astype(float)
    return float((w ** 2).sum() / space), float(np.abs(w).sum() / space), int(np.abs(I.weights).max(initial=0))


def predicted_rho(sigma2: float, mean_abs: float, max_abs: int, q: int, n: int, log_term: float) -> Optional[float]:
    if mean_abs == 0:
        return None
    root = math.sqrt(float(n) ** q)
    return math.sqrt(sigma2) * log_term / (mean_abs * root) * max(1.0, max_abs / root)


def proposition_ell(N: int, rho: float, epsilon: float, cap: int) -> Optional[int]:
    for ell in range(1, cap + 1):
        if N ** (1.0 / (4 * ell)) * rho <= 0.5 * epsilon ** (2 * ell):
            return ell
    return None


def refute_xor(
    I: XorInstance,
    epsilon: Optional[float] = None,
    k: Optional[int] = None,
    ell: Optional[int] = None,
    seed: int = 0,
    max_ell: Optional[int] = None,
    tol: Optional[float] = None,
) -> RefutationReport:
    if I.k < 2:
        raise ValueError(f"refute_xor needs arity >= 2, got k={I.k}")
    if epsilon is None and (k is None or ell is None):
        raise ValueError("need epsilon or both k and ell")
    cap = config.MAX_ELL if max_ell is None else max_ell
    pairs, reduction, factor = reduce_to_pairs(I, seed=seed)
    xg = xor_graph(pairs)
    sigma2, mean_abs, max_abs = weight_moments(I)
    q = I.k // 2
    side = I.n ** (q if I.k % 2 == 0 else q + 1)
    base = dict(
        arity=I.k,
        n=I.n,
        reduction=reduction,
        factor=factor,
        n_flat=pairs.n,
        support=int(xg.vertices.size),
        m_abs=I.m_abs,
        vol=xg.vol,
        sigma2=sigma2,
        mean_abs_w=mean_abs,
        max_abs_w=max_abs,
        predicted_rho_logN=predicted_rho(sigma2, mean_abs, max_abs, q, I.n, math.log(max(side, 2))),
        predicted_rho_logn=predicted_rho(sigma2, mean_abs, max_abs, q, I.n, math.log(max(I.n, 2))),
        epsilon=epsilon,
        nominal_bound=None if epsilon is None else 0.5 + 1.5 * epsilon,
    )
    if xg.graph is None:
        logger.info("all %d-XOR weights cancel after reduction; objective is identically 1/2", I.k)
        return RefutationReport(**base, refuted=True, reason="weights cancel", advantage_bound=0.0, bound_obj=0.5)

    G = xg.graph
    rho = operator_radius(walk_operator(G), "signed", tol=tol)
    eig = 0.5 + 0.5 * min(1.0, rho * xg.scale)
    base.update(
        d_min=G.d_min,
        pi_star=G.pi_star,
        rho=rho,
        eig_bound=eig,
        ell_prop=None if epsilon is None else proposition_ell(side, rho, epsilon, cap),
    )
    try:
        cert = certify_2xor(G, k=k, ell=ell, epsilon=epsilon, max_ell=cap, tol=tol)
    except SpectralPremiseError as err:
        logger.warning("no %d-XOR refutation: %s", I.k, err)
        return RefutationReport(**base, refuted=False, reason=str(err), advantage_bound=1.0, bound_obj=1.0)

    advantage = cert.beta * xg.scale
    refuted = advantage < 1.0
    return RefutationReport(
        **base,
        parameters=cert.parameters,
        certificate=cert.to_model(),
        refuted=refuted,
        reason="" if refuted else f"certificate is vacuous (beta = {cert.beta:.4g})",
        advantage_bound=min(1.0, advantage),
        bound_obj=0.5 + 0.5 * min(1.0, advantage),
        rounds=cert.R * factor,
    )


# ---------------------------------------------------------------- predicates

@dataclass(frozen=True)
class FourierTable:
    k: int
    coefficients: Tuple[Fraction, ...]

    @property
    def mean(self) -> Fraction:
        return self.coefficients[0]

    def positions(self, mask: int) -> List[int]:
        return [i for i in range(self.k) if mask >> i & 1]

    def evaluate(self, index: int) -> Fraction:
        """sum_alpha P^(alpha) z^alpha at the input with bit i set iff z_i = -1."""
        return sum(
            (c if bin(index & mask).count("1") % 2 == 0 else -c) for mask, c in enumerate(self.coefficients)
        )

    def parseval(self) -> Fraction:
        return sum(c * c for c in self.coefficients)

    def support(self) -> List[int]:
        return [mask for mask, c in enumerate(self.coefficients) if c != 0]


def fourier(P: Union[str, Sequence[int]], k: Optional[int] = None) -> FourierTable:
    table = tuple(int(c) for c in P)
    if k is None:
        k = max(0, len(table).bit_length() - 1)
    table = parse_predicate(table, k)
    size = 2 ** k
    coeffs = []
    for mask in range(size):
        total = sum(v if bin(j & mask).count("1") % 2 == 0 else -v for j, v in enumerate(table))
        coeffs.append(Fraction(total, size))
    return FourierTable(k, tuple(coeffs))


@dataclass(frozen=True, eq=False)
class Decomposition:
    m: int
    parts: Dict[int, XorInstance]

    def value(self, mask: int, x: Union[int, Sequence[int]]) -> Fraction:
        """I^alpha(x) = (1/m) sum_T w_T x^T, with the empty instance read as 0."""
        if self.m == 0:
            return Fraction(0)
        return Fraction(xor_value(self.parts[mask], x), self.m)


def decompose_instance(I: CspInstance) -> Decomposition:
    digits = I.digits()
    parts: Dict[int, XorInstance] = {}
    for mask in range(2 ** I.k):
        pos = [i for i in range(I.k) if mask >> i & 1]
        if not pos:
            parts[mask] = _from_arrays(I.n, 0, np.zeros(min(I.m, 1), dtype=np.int64), np.full(min(I.m, 1), I.m))
            continue
        sub = np.zeros(I.m, dtype=np.int64)
        for col in pos:
            sub = sub * I.n + digits[:, col]
        signs = np.prod(I.zeta[:, pos], axis=1) if I.m else np.zeros(0, dtype=np.int64)
        parts[mask] = _from_arrays(I.n, len(pos), sub, signs)
    return Decomposition(I.m, parts)


def _theorem_rounds(k: int, epsilon: float, delta: Optional[float]) -> Tuple[Optional[int], Optional[int]]:
    if delta is None or delta <= 0:
        return None, None
    ell = math.ceil(math.ceil(k / 2) / (2 * delta))
    try:
        rounds = math.ceil(k * ell * (3 * 2 ** (k / 2 - 1) / epsilon) ** (2 * ell) + k)
    except OverflowError:
        rounds = None
    return ell, rounds


def refute_predicate(
    I: CspInstance,
    epsilon: float,
    delta: Optional[float] = None,
    k: Optional[int] = None,
    ell: Optional[int] = None,
    seed: int = 0,
    max_ell: Optional[int] = None,
    jobs: Optional[int] = None,
    tol: Optional[float] = None,
) -> PredicateRefutationReport:
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if I.m == 0:
        raise ValueError("instance has no clauses")
    ft = fourier(I.predicate, I.k)
    dec = decompose_instance(I)
    m = I.m
    if delta is None and I.n > 1:
        delta = math.log(m) / math.log(I.n) - math.ceil(I.k / 2)

    def one(mask: int) -> AlphaBound:
        c = ft.coefficients[mask]
        part = dec.parts[mask]
        m_alpha = part.m_abs
        pos = ft.positions(mask)
        common = dict(alpha=pos, size=len(pos), coeff=str(c), coeff_float=float(c), m_alpha=m_alpha)
        if len(pos) == 1 or m_alpha == 0:
            return AlphaBound(**common, method="l1", bound=m_alpha / m)
        rep = refute_xor(
            part, epsilon=None if k is not None else epsilon, k=k, ell=ell,
            seed=int(child_rng(seed, mask).integers(2 ** 62)), max_ell=max_ell, tol=tol,
        )
        if rep.refuted:
            return AlphaBound(**common, method="certificate", bound=min(rep.advantage_bound, 1.0) * m_alpha / m,
                              refutation=rep)
        return AlphaBound(**common, method="l1-fallback", bound=m_alpha / m, refutation=rep)

    masks = [mask for mask in ft.support() if mask != 0]
    workers = max(1, config.JOBS if jobs is None else jobs)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        alphas = list(pool.map(one, masks))

    bound = float(ft.mean) + sum(abs(a.coeff_float) * a.bound for a in alphas)
    blocking = [a.alpha for a in alphas if a.method == "l1-fallback"]
    measured = [a.refutation.rounds for a in alphas if a.refutation is not None and a.refutation.rounds]
    ell_thm, rounds_thm = _theorem_rounds(I.k, epsilon, delta)
    refuted = not blocking and bound < 1.0
    if blocking:
        logger.warning("predicate refutation blocked by %s", blocking)
    logger.info("predicate bound %.6g (mean %s, nominal %.6g)", bound, ft.mean, float(ft.mean) + 2 ** (I.k / 2) * 1.5 * epsilon)
    return PredicateRefutationReport(
        k=I.k,
        n=I.n,
        m=m,
        p=I.p,
        expected_m=I.expected_m,
        epsilon=epsilon,
        delta=delta if delta is not None else 0.0,
        mean_P=str(ft.mean),
        bound=min(bound, 1.0),
        nominal_bound=float(ft.mean) + math.sqrt(2 ** I.k) * 1.5 * epsilon,
        refuted=refuted,
        blocking=blocking,
        alphas=alphas,
        ell_theorem=ell_thm,
        rounds_theorem=rounds_thm,
        rounds_measured=max(measured + [1]),
    )


# ---------------------------------------------------------------- generators and weight laws

def _key_space(n: int, k: int) -> int:
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if k * math.log2(max(n, 1)) > KEY_BITS_MAX:
        raise ValueError(f"key space n^k = {n}^{k} exceeds 2^{KEY_BITS_MAX}")
    return n ** k


def distinct_keys(space: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` distinct keys of [0, space), uniformly, without materialising the space."""
    if count > space:
        raise ValueError(f"cannot draw {count} distinct keys from {space}")
    if count * 4 >= space:
        return np.sort(rng.choice(space, size=count, replace=False))
    keys = np.zeros(0, dtype=np.int64)
    while keys.size < count:
        draw = rng.integers(0, space, size=int((count - keys.size) * 1.1) + 16)
        both = np.concatenate([keys, draw])
        _, first = np.unique(both, return_index=True)
        keys = both[np.sort(first)]
    return np.sort(keys[:count])


def wn_zero_probability(N: int, p: float) -> float:
    """P(W_N(p) = 0): c ~ Bin(N, p) even and the c signs split evenly."""
    if p == 0:
        return 1.0
    if p == 1:
        return 0.0 if N % 2 else math.comb(N, N // 2) / 2.0 ** N
    total = 0.0
    for c in range(0, N + 1, 2):
        log_c = math.lgamma(N + 1) - math.lgamma(c + 1) - math.lgamma(N - c + 1) + c * math.log(p) + (N - c) * math.log1p(-p)
        log_half = math.lgamma(c + 1) - 2 * math.lgamma(c // 2 + 1) - c * math.log(2)
        total += math.exp(log_c + log_half)
    return min(1.0, total)


def _nonzero_rate(spec: WeightSpec) -> float:
    if spec.kind == "table":
        return float(sum(pr for v, pr in zip(spec.values, spec.probs) if v != 0))
    if spec.kind == "rademacher":
        return spec.p
    return 1.0 - wn_zero_probability(spec.N, spec.p)


def sample_weights(spec: WeightSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` draws from the law of W conditioned on W != 0."""
    if spec.kind == "table":
        vals = np.array([v for v in spec.values if v != 0], dtype=np.int64)
        pr = np.array([q for v, q in zip(spec.values, spec.probs) if v != 0], dtype=float)
        return rng.choice(vals, size=count, p=pr / pr.sum())
    n_draws = 1 if spec.kind == "rademacher" else spec.N
    out = np.zeros(count, dtype=np.int64)
    todo = np.arange(count)
    while todo.size:
        c = rng.binomial(n_draws, spec.p, size=todo.size)
        c = np.maximum(c, 0)
        heads = rng.binomial(c, 0.5)
        x = 2 * heads - c
        ok = x != 0
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def gen_weighted_xor(n: int, k: int, W: Optional[WeightSpec] = None, seed: int = 0) -> XorInstance:
    spec = W or WeightSpec()
    space = _key_space(n, k)
    rng = child_rng(seed, 0)
    rate = _nonzero_rate(spec)
    if rate <= 0:
        return _from_arrays(n, k, np.zeros(0), np.zeros(0), seed=seed)
    count = int(rng.binomial(space, min(rate, 1.0)))
    keys = distinct_keys(space, count, rng)
    weights = sample_weights(spec, count, rng)
    inst = _from_arrays(n, k, keys, weights, seed=seed)
    logger.info("generated %d-XOR on n=%d: %d terms, m=%d", k, n, inst.num_terms, inst.m_abs)
    return inst


def gen_csp(n: int, k: int, P: Union[str, Sequence[int]], m: float, seed: int = 0) -> CspInstance:
    table = parse_predicate(P, k)
    space = _key_space(n, k)
    p = m / space
    if not 0 <= p <= 1:
        raise ValueError(f"expected clause count {m} exceeds the key space {space}")
    rng = child_rng(seed, 0)
    count = int(rng.binomial(space, p))
    codes = distinct_keys(space, count, rng)
    zeta = np.where(rng.random((count, k)) < 0.5, 1, -1).astype(np.int64)
    band = 4 * math.sqrt(max(m, 1.0))
    logger.info("generated CSP n=%d k=%d: %d clauses (expected %.1f +- %.1f)", n, k, count, m, band)
    return CspInstance(n, k, table, codes, zeta, p=p, seed=seed)


def _se(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def weight_dist_stats(N: int, p: float, samples: int = 100_000, seed: int = 0) -> WeightStats:
    """Monte Carlo moments and tails of X ~ W_N(p) = 2 Bin(c, 1/2) - c, c ~ Bin(N, p)."""
    if N < 1 or not 0 <= p <= 1 or samples < 2:
        raise ValueError(f"need N >= 1, p in [0, 1] and samples >= 2, got N={N}, p={p}, samples={samples}")
    if samples < 10_000:
        logger.warning("weight statistics with %d samples are unstable", samples)
    rng = child_rng(seed, 0)
    c = rng.binomial(N, p, size=samples)
    x = (2 * rng.binomial(c, 0.5) - c).astype(float)
    ax = np.abs(x)
    pN = p * N
    mean, mean_se = float(x.mean()), _se(x)
    second, second_se = float((x ** 2).mean()), _se(x ** 2)
    abs_mean, abs_se = float(ax.mean()), _se(ax)

    tails: List[TailCheck] = []
    alt = None
    if pN >= 1:
        branch = "pN>=1"
        bound = 2 * math.exp(-1.5) * math.sqrt(pN)
        for t in (1.0, 1.5, 2.0):
            hit = (ax > 2 * t * math.sqrt(pN)).astype(float)
            tails.append(_tail(2 * t * math.sqrt(pN), hit, 2 * math.exp(-t * t)))
    else:
        branch = "pN<1"
        log_term = math.log(1 / (1 - pN)) if pN < 1 else math.inf
        bound = log_term / (2 * math.e)
        alt = log_term / math.e
        for t in (1.0, 2.0, 4.0):
            hit = (ax >= 1 + t).astype(float)
            tails.append(_tail(1 + t, hit, math.exp(-t / 2)))

    violations: List[str] = []
    if abs(mean) > 4 * mean_se + (0.0 if mean_se else 1e-12):
        violations.append(f"mean {mean:.4g} differs from 0 by more than 4 SE")
    if abs(second - pN) > 4 * second_se + (0.0 if second_se else 1e-12):
        violations.append(f"second moment {second:.4g} differs from pN = {pN:.4g} by more than 4 SE")
    if abs_mean < bound - 4 * abs_se - 1e-12:
        violations.append(f"E|X| = {abs_mean:.4g} below the lower bound {bound:.4g}")
    violations += [f"tail beyond {t.threshold:.3g}: {t.frequency:.3g} > 2 x {t.bound:.3g}" for t in tails if t.violated]
    return WeightStats(
        N=N,
        p=p,
        samples=samples,
        pN=pN,
        mean=mean,
        mean_se=mean_se,
        second_moment=second,
        second_moment_se=second_se,
        abs_mean=abs_mean,
        abs_mean_se=abs_se,
        branch=branch,
        abs_bound=bound,
        abs_bound_alt=alt,
        abs_bound_alt_ok=None if alt is None else abs_mean >= alt - 4 * abs_se - 1e-12,
        tails=tails,
        violations=violations,
        passed=not violations,
    )


def _tail(threshold: float, hit: np.ndarray, bound: float) -> TailCheck:
    freq = float(hit.mean())
    se = _se(hit)
    return TailCheck(threshold=threshold, frequency=freq, bound=bound, se=se, violated=freq > 2 * bound + 4 * se)
