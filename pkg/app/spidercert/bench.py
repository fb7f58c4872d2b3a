"""Random instance generators, exact optima by Gray-code enumeration, eigenvalue baselines
and the experiment / soundness-sweep drivers."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from . import config
from .certifier import SpectralPremiseError, certify_2xor, certify_maxcut
from .csp import (
    CspInstance,
    XorInstance,
    decompose_instance,
    fourier,
    gen_csp,
    gen_weighted_xor,
    refute_predicate,
    refute_xor,
    xor_from_graph,
)
from .feaspoint import f, lower_bound, radius
from .graph import SignedGraph, build_graph
from .schemas import EigBounds, Experiment, ExperimentConfig, SweepReport, WeightSpec
from .utils import child_rng, parity, sym

logger = logging.getLogger(__name__)

SOUNDNESS_SLACK = 1e-12


# ---------------------------------------------------------------- generators

def _relabel(n: int, u: np.ndarray, v: np.ndarray, sign: int) -> SignedGraph:
    """Graph on the non-isolated vertices, relabelled 0..n'-1 in order."""
    if u.size == 0:
        raise ValueError(f"random graph on {n} vertices has no edges")
    used = np.unique(np.concatenate([u, v]))
    lu, lv = np.searchsorted(used, u), np.searchsorted(used, v)
    return build_graph(((int(a), int(b), 1, sign) for a, b in zip(lu, lv)), n=int(used.size))


def gen_gnp(n: int, avg_degree: float, seed: int = 0, sign: int = -1) -> SignedGraph:
    """G(n, p) with p = avg_degree / (n - 1); isolated vertices are dropped."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    p = min(1.0, avg_degree / (n - 1))
    rng = child_rng(seed, 0)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return _relabel(n, iu[keep], ju[keep], sign)


def gen_regular(n: int, degree: int, seed: int = 0, simple: bool = False, max_retries: int = 100,
                sign: int = -1) -> SignedGraph:
    """Configuration-model multigraph; a self-paired stub pair becomes a loop of multiplicity 2."""
    degree = int(degree)
    if n < 2 or degree < 1:
        raise ValueError(f"need n >= 2 and degree >= 1, got n={n}, degree={degree}")
    if (n * degree) % 2:
        raise ValueError(f"n * degree = {n * degree} must be even")
    stubs = np.repeat(np.arange(n), degree)
    for attempt in range(max_retries if simple else 1):
        perm = child_rng(seed, attempt).permutation(stubs).reshape(-1, 2)
        u, v = perm.min(axis=1), perm.max(axis=1)
        loops = u == v
        pairs = u * n + v
        if not simple or (not loops.any() and np.unique(pairs).size == pairs.size):
            break
    else:
        logger.warning("no simple %d-regular graph on %d vertices after %d pairings; keeping a multigraph",
                       degree, n, max_retries)
    edges = [(int(a), int(b), 2 if a == b else 1, sign) for a, b in zip(u, v)]
    return build_graph(edges, n=n)


def gen_complete(n: int, sign: int = -1) -> SignedGraph:
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    iu, ju = np.triu_indices(n, 1)
    return build_graph(((int(a), int(b), 1, sign) for a, b in zip(iu, ju)), n=n)


def random_signs(G: SignedGraph, seed: int = 0) -> SignedGraph:
    signs = np.where(child_rng(seed, 1).random(len(G.edges)) < 0.5, 1, -1)
    return build_graph(((u, v, m, int(s)) for (u, v, m, _), s in zip(G.edges, signs)), n=G.n)


# ---------------------------------------------------------------- exact optima

def max_parity_polynomial(masks: np.ndarray, weights: np.ndarray, n: int) -> int:
    """max over a in {0,1}^n of sum_t w_t (-1)^{|a & mask_t|}.

    Low bits are evaluated for all settings at once as a matrix-vector product;
    high bits walk a Gray code and only flip the coefficients they touch.
    """
    if n > config.BRUTE_MAX_N:
        raise ValueError(f"brute force is limited to n <= {config.BRUTE_MAX_N}, got {n}")
    masks = np.asarray(masks, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.int64)
    if masks.size == 0:
        return 0
    masks, inverse = np.unique(masks, return_inverse=True)
    w = np.bincount(inverse, weights=weights, minlength=masks.size).astype(np.int64)

    L = min(n, config.BRUTE_LOW_BITS)
    H = n - L
    lo = masks & ((1 << L) - 1)
    hi = masks >> L
    groups, g = np.unique(lo, return_inverse=True)
    a = np.arange(1 << L, dtype=np.int64)
    chi = 1.0 - 2.0 * parity(a[:, None] & groups[None, :])

    sign = np.ones(masks.size, dtype=np.int64)
    coeff = np.bincount(g, weights=w, minlength=groups.size)
    flips = [np.flatnonzero((hi >> j) & 1) for j in range(H)]
    best = (chi @ coeff).max()
    for step in range(1, 1 << H):
        j = (step & -step).bit_length() - 1
        idx = flips[j]
        if idx.size:
            np.add.at(coeff, g[idx], -2.0 * w[idx] * sign[idx])
            sign[idx] *= -1
            best = max(best, (chi @ coeff).max())
    return int(round(best))


def _graph_polynomial(G: SignedGraph) -> Tuple[np.ndarray, np.ndarray]:
    masks = [0 if u == v else (1 << u) | (1 << v) for u, v, _, _ in G.edges]
    weights = [(1 if u == v else 2) * m * s for u, v, m, s in G.edges]
    return np.asarray(masks, dtype=np.int64), np.asarray(weights, dtype=np.int64)


def brute_optimum(instance: Union[SignedGraph, XorInstance, CspInstance]) -> Fraction:
    """Exact optimum of the normalised objective."""
    if isinstance(instance, SignedGraph):
        masks, weights = _graph_polynomial(instance)
        best = max_parity_polynomial(masks, weights, instance.n)
        return Fraction(instance.vol + best, 2 * instance.vol)
    if isinstance(instance, XorInstance):
        m = instance.m_abs
        if m == 0:
            return Fraction(1, 2)
        best = max_parity_polynomial(instance.masks(), instance.weights, instance.n)
        return Fraction(m + best, 2 * m)
    if instance.m == 0:
        return Fraction(0)
    # 2^k P(z) = sum_alpha 2^k P^(alpha) z^alpha has integer coefficients
    ft = fourier(instance.predicate, instance.k)
    dec = decompose_instance(instance)
    scale = 2 ** instance.k
    masks, weights = [], []
    for mask in ft.support():
        part = dec.parts[mask]
        c = ft.coefficients[mask] * scale
        masks.append(part.masks())
        weights.append(part.weights * int(c))
    best = max_parity_polynomial(np.concatenate(masks), np.concatenate(weights), instance.n)
    return Fraction(best, scale * instance.m)


def eig_bounds(G: SignedGraph) -> EigBounds:
    A = G.adjacency
    L = np.diag(G.deg.astype(float)) - A
    lam_l = float(np.linalg.eigvalsh(L)[-1])
    r = np.sqrt(G.deg.astype(float))
    # D^{-1/2} A D^{-1/2} is similar to K
    lam_k = float(np.linalg.eigvalsh(sym(-A / r[:, None] / r[None, :]))[-1])
    lam_s = float(np.linalg.eigvalsh(sym(G.signed_adjacency / r[:, None] / r[None, :]))[-1])
    return EigBounds(
        laplacian_bound=G.n / (4 * G.num_edges) * lam_l,
        walk_bound=0.5 + 0.5 * lam_k,
        signed_bound=0.5 + 0.5 * lam_s,
        lambda_max_laplacian=lam_l,
        lambda_max_neg_walk=lam_k,
        lambda_max_signed=lam_s,
    )


# ---------------------------------------------------------------- experiments

def _generate(cfg: ExperimentConfig, seed: int) -> SignedGraph:
    if cfg.generator == "gnp":
        G = gen_gnp(cfg.n, cfg.degree, seed=seed)
    elif cfg.generator == "regular":
        G = gen_regular(cfg.n, int(cfg.degree), seed=seed, simple=cfg.simple)
    else:
        G = gen_complete(cfg.n)
    return random_signs(G, seed) if cfg.kind == "2xor" else G


def _timed(row: Experiment, stage: str, fn: Callable):
    start = time.perf_counter()
    try:
        return fn()
    except (ValueError, np.linalg.LinAlgError) as err:
        row.errors[stage] = str(err)
        logger.warning("%s seed=%d: %s failed: %s", row.name, row.seed, stage, err)
        return None
    finally:
        row.timings[stage] = time.perf_counter() - start


def run_single(cfg: ExperimentConfig, seed: int) -> Experiment:
    row = Experiment(name=cfg.name, generator=cfg.generator, n=cfg.n, degree=cfg.degree, seed=seed, kind=cfg.kind)
    G = _timed(row, "generate", lambda: _generate(cfg, seed))
    if G is None:
        return row
    row.vertices, row.edges, row.pi_star, row.d_min = G.n, G.num_edges, G.pi_star, G.d_min

    eig = _timed(row, "eig", lambda: eig_bounds(G))
    if eig is not None:
        row.laplacian_bound, row.walk_bound, row.signed_bound = eig.laplacian_bound, eig.walk_bound, eig.signed_bound

    certify = certify_maxcut if cfg.kind == "maxcut" else certify_2xor
    params = dict(epsilon=cfg.epsilon) if cfg.epsilon is not None else dict(k=cfg.k, ell=cfg.ell)
    cert = _timed(row, "certify", lambda: certify(G, max_ell=cfg.max_ell, **params))
    if cert is not None:
        row.rho, row.k, row.ell, row.R = cert.rho, cert.k, cert.ell, cert.R
        row.beta_closed, row.beta_sharp = cert.beta_closed, cert.beta_sharp
        row.cert_bound, row.cert_bound_sharp = cert.bound_obj, cert.bound_obj_sharp

    if G.n <= cfg.brute_max_n:
        opt = _timed(row, "optimum", lambda: brute_optimum(G))
        if opt is not None:
            row.optimum, row.optimum_exact = float(opt), str(opt)

    lb = _timed(row, "lower_bound", lambda: lower_bound(xor_from_graph(G, unit=True), cfg.lb_rounds, seed=seed))
    if lb is not None:
        row.feasible_value = lb.value

    row.violations = len(experiment_violations(row))
    for v in experiment_violations(row):
        logger.error("%s seed=%d: %s", row.name, seed, v)
    return row


def experiment_violations(row: Experiment) -> List[str]:
    out: List[str] = []
    if row.optimum is not None:
        if row.optimum < 0.5 - SOUNDNESS_SLACK:
            out.append(f"optimum {row.optimum} below 1/2")
        for name in ("cert_bound", "cert_bound_sharp", "laplacian_bound", "walk_bound", "signed_bound"):
            bound = getattr(row, name)
            if name in ("walk_bound", "laplacian_bound") and row.kind == "2xor":
                continue
            if bound is not None and row.optimum > bound + SOUNDNESS_SLACK:
                out.append(f"optimum {row.optimum:.12g} exceeds {name} {bound:.12g}")
    if row.feasible_value is not None and row.feasible_value < 0.5 - SOUNDNESS_SLACK:
        out.append(f"feasible value {row.feasible_value} below 1/2")
    if row.R is not None and row.cert_bound is not None:
        # a max-cut certificate of spider size R is 2R-local
        local = 2 * row.R if row.kind == "maxcut" else row.R
        floor = 0.5 + 0.5 * float(f(1.0 / radius(local)))
        if row.cert_bound < floor - SOUNDNESS_SLACK:
            out.append(f"certified bound {row.cert_bound:.6g} below the {local}-round feasible value {floor:.6g}")
    return out


def run_experiment(cfg: ExperimentConfig, jobs: Optional[int] = None) -> List[Experiment]:
    workers = max(1, config.JOBS if jobs is None else jobs)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda s: run_single(cfg, s), cfg.seeds))
    logger.info("experiment %s: %d runs, %d violations", cfg.name, len(rows), sum(r.violations for r in rows))
    return rows


# ---------------------------------------------------------------- soundness sweep

FAMILIES = ("maxcut", "2xor", "4xor", "csp")
PREDICATES = {2: ("0110", "1000"), 3: ("01101001", "10000000")}
SWEEP_EPSILON = 0.9
# (9, 1) certifies K_n well below 1 for 6 <= n <= 14
COMPLETE_SPIDER = (9, 1)


def _sweep_one(index: int, seed: int) -> Tuple[str, List[str], bool]:
    """(family, violations, certified below 1) for the index-th random instance."""
    family = FAMILIES[index % len(FAMILIES)]
    rng = child_rng(seed, index)
    sub = int(rng.integers(2 ** 31))
    spiders = ((3, 1), (9, 2))
    issues: List[str] = []
    below = False

    def check(label: str, opt: Fraction, bound: float) -> None:
        if float(opt) > bound + SOUNDNESS_SLACK:
            issues.append(f"{family}#{index} {label}: optimum {opt} > bound {bound:.12g}")

    if family in ("maxcut", "2xor"):
        n = int(rng.integers(8, 21))
        G = gen_gnp(n, float(rng.uniform(3, 6)), seed=sub)
        if family == "2xor":
            G = random_signs(G, sub)
        opt = brute_optimum(G)
        certify = certify_maxcut if family == "maxcut" else certify_2xor
        eig = eig_bounds(G)
        check("eigen", opt, eig.signed_bound)
        for k, ell in spiders:
            cert = certify(G, k=k, ell=ell)
            check(f"spider({k},{ell})", opt, cert.bound_obj)
            check(f"spider({k},{ell}) sharp", opt, cert.bound_obj_sharp)
            below = below or cert.bound_obj_sharp < 1
        try:
            cert = certify(G, epsilon=SWEEP_EPSILON, max_ell=4)
        except SpectralPremiseError:
            cert = None
        if cert is not None:
            check(f"epsilon={SWEEP_EPSILON}", opt, cert.bound_obj)
            check(f"epsilon={SWEEP_EPSILON} sharp", opt, cert.bound_obj_sharp)
        if family == "maxcut":
            K = gen_complete(int(rng.integers(6, 15)))
            k, ell = COMPLETE_SPIDER
            cert = certify_maxcut(K, k=k, ell=ell)
            opt_k = brute_optimum(K)
            check(f"K{K.n} spider({k},{ell})", opt_k, cert.bound_obj)
            check(f"K{K.n} spider({k},{ell}) sharp", opt_k, cert.bound_obj_sharp)
            below = below or cert.bound_obj_sharp < 1
    elif family == "4xor":
        n = int(rng.integers(4, 9))
        inst = gen_weighted_xor(n, 4, WeightSpec(kind="rademacher", p=float(rng.uniform(0.2, 0.8))), seed=sub)
        opt = brute_optimum(inst)
        for k, ell in spiders:
            rep = refute_xor(inst, k=k, ell=ell, seed=sub)
            check(f"refute({k},{ell})", opt, rep.bound_obj)
            if rep.eig_bound is not None:
                check("eigen", opt, rep.eig_bound)
            below = below or rep.bound_obj < 1
    else:
        k = int(rng.integers(2, 4))
        n = int(rng.integers(5, 13))
        P = PREDICATES[k][int(rng.integers(2))]
        inst = gen_csp(n, k, P, m=float(rng.uniform(0.3, 0.9)) * n ** k, seed=sub)
        if inst.m == 0:
            return family, issues, below
        opt = brute_optimum(inst)
        rep = refute_predicate(inst, epsilon=0.5, k=3, ell=1, seed=sub)
        check("predicate", opt, rep.bound)
        below = below or rep.bound < 1
    return family, issues, below


def soundness_sweep(count: int = 200, seed: int = 0, jobs: Optional[int] = None) -> SweepReport:
    workers = max(1, config.JOBS if jobs is None else jobs)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda i: _sweep_one(i, seed), range(count)))
    by_family: Dict[str, int] = {f: 0 for f in FAMILIES}
    failures: List[str] = []
    below = 0
    for family, issues, certified in results:
        by_family[family] += 1
        failures += issues
        below += int(certified)
    for msg in failures:
        logger.error("soundness violation: %s", msg)
    logger.info("soundness sweep: %d instances, %d violations, %d certified below 1", count, len(failures), below)
    return SweepReport(
        count=count,
        violations=len(failures),
        by_family=by_family,
        certified_below_one=below,
        failures=failures,
        passed=not failures,
    )
