"""Local degree-2 SOS certificates for 2-XOR and max-cut, built from a spider PSD
matrix, plus an independent verifier for every algebraic step they rely on."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from . import config
from .config import resolve_tol
from .graph import (
    EnumerationTooLarge,
    SignedGraph,
    WalkOperator,
    enumeration_bits,
    operator_radius,
    sample_tree_walks,
    tree_walk_table,
    walk_operator,
)
from .schemas import CertificateModel, CheckResult, ParameterChoice, VerificationReport
from .spider import SpiderMatrix, build_psi, build_spider, psi_dot_block, spider_alpha, verify_psi
from .utils import ceil_tol, child_rng, chunks, rel_residual, sym

logger = logging.getLogger(__name__)

SAMPLED_Z_MAX = 4.0


class SpectralPremiseError(ValueError):
    """The spectral radius is too large for the requested accuracy."""


# ---------------------------------------------------------------- parameters

def beta_closed(k: int, ell: int, pi_star: float, rho: float) -> float:
    alpha = spider_alpha(k, ell)
    return k * pi_star ** -0.5 / (2 * alpha) * rho ** (2 * ell) + 2 / alpha


def beta_sharp(c0: float, inner_top: float, alpha: float, gamma: float) -> float:
    return (c0 + inner_top * gamma) / alpha


def select_parameters(
    epsilon: float,
    pi_star: float,
    rho: float,
    max_ell: Optional[int] = None,
    tol: Optional[float] = None,
) -> ParameterChoice:
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0 < pi_star <= 1:
        raise ValueError(f"pi_star must lie in (0, 1], got {pi_star}")
    if rho < 0:
        raise ValueError(f"spectral radius must be non-negative, got {rho}")
    if rho >= epsilon:
        raise SpectralPremiseError(
            f"spectral premise fails: rho = {rho:.6g} >= epsilon = {epsilon:.6g}; "
            "the spider certificate cannot reach this accuracy"
        )
    cap = config.MAX_ELL if max_ell is None else max_ell
    tol = resolve_tol(tol)

    raw = 0.0 if rho == 0 else 0.25 * math.log(epsilon ** 2 * pi_star) / math.log(rho / epsilon)
    ell = max(1, ceil_tol(raw))
    if ell > cap:
        raise SpectralPremiseError(f"leg length {ell} exceeds the cap {cap} (rho = {rho:.6g}, epsilon = {epsilon:.6g})")
    k = ceil_tol((1.0 / epsilon) ** (2 * ell))
    raised = False
    if k < 3 ** ell:
        k, raised = 3 ** ell, True
    beta = beta_closed(k, ell, pi_star, rho)
    choice = ParameterChoice(
        epsilon=epsilon,
        pi_star=pi_star,
        rho=rho,
        raw_ell=raw,
        ell=ell,
        k=k,
        R=k * ell + 1,
        alpha=spider_alpha(k, ell),
        raised_k=raised,
        beta_closed=beta,
        within_guarantee=beta <= 2.5 * epsilon * (1 + tol),
    )
    logger.info("selected l=%d k=%d R=%d (raw l %.4f) beta=%.6g", ell, k, choice.R, raw, beta)
    if not choice.within_guarantee:
        logger.warning("beta %.6g exceeds 5/2 epsilon = %.6g", beta, 2.5 * epsilon)
    return choice


# ---------------------------------------------------------------- wack step

@dataclass(frozen=True, eq=False)
class WackTerm:
    """Square-completion bound E_pi sum_v M_uv X_u X_v <= gamma E_pi X_u^2."""

    M: Optional[np.ndarray] = field(repr=False)
    pi: np.ndarray = field(repr=False)
    norm: float
    gamma: float
    exact: bool = True

    @property
    def pi_star(self) -> float:
        return float(self.pi.min())

    @cached_property
    def pair_coefficients(self) -> Tuple[np.ndarray, np.ndarray]:
        """(a, b) with a[u, v] = M_uv^2 / (2 gamma pi(v)) and b[v] = gamma pi(v) / 2."""
        if self.M is None:
            raise ValueError("coefficients need the explicit matrix")
        if self.gamma == 0:
            return np.zeros_like(self.M), np.zeros_like(self.pi)
        a = self.M ** 2 / (2 * self.gamma * self.pi[None, :])
        return a, self.gamma * self.pi / 2

    @cached_property
    def diagonals(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(D1, D2, slack): pi-weighted sums of the square coefficients and the leftover to gamma pi."""
        a, b = self.pair_coefficients
        d1 = self.pi * a.sum(axis=1)
        d2 = b * float(self.pi.sum())
        return d1, d2, self.gamma * self.pi - d1 - d2

    def sos_matrix(self) -> np.ndarray:
        """sum_{u,v} pi(u) (a_uv e_u - b_v e_v)(a_uv e_u - b_v e_v)^T rebuilt from the square roots."""
        if self.M is None:
            raise ValueError("squares need the explicit matrix")
        n = self.pi.size
        if self.gamma == 0:
            return np.zeros((n, n))
        a = self.M / np.sqrt(2 * self.gamma * self.pi[None, :])
        b = np.sqrt(self.gamma * self.pi / 2)
        diag = self.pi * (a ** 2).sum(axis=1) + b ** 2 * float(self.pi.sum())
        cross = self.pi[:, None] * 2 * a * b[None, :]
        return np.diag(diag) - sym(cross)

    def row_sums(self) -> np.ndarray:
        """sum_v M_uv^2 / pi(v) per row u."""
        if self.M is None:
            raise ValueError("row condition needs the explicit matrix")
        return (self.M ** 2 / self.pi[None, :]).sum(axis=1)

    def row_condition(self, gamma: Optional[float] = None) -> float:
        """max_u sum_v M_uv^2 / pi(v) - gamma^2; non-positive exactly when the square completion closes."""
        g = self.gamma if gamma is None else gamma
        return float(self.row_sums().max() - g * g)

    def square_identity_residual(self) -> float:
        """Largest |2 a b - M_uv| over pairs, with a, b the roots of the two square coefficients."""
        if self.M is None or self.gamma == 0:
            return 0.0
        a = self.M / np.sqrt(2 * self.gamma * self.pi[None, :])
        b = np.sqrt(self.gamma * self.pi / 2)[None, :]
        return float(np.abs(2 * a * b - self.M).max())


def wack_bound(M: np.ndarray, pi: np.ndarray) -> WackTerm:
    M = np.asarray(M, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] != pi.size:
        raise ValueError(f"matrix shape {M.shape} does not match distribution of size {pi.size}")
    if np.any(pi <= 0):
        raise ValueError("distribution must have full support")
    norm = float(np.linalg.norm(M, 2)) if M.size else 0.0
    gamma = float(pi.min()) ** -0.5 * norm
    return WackTerm(M=M, pi=pi, norm=norm, gamma=gamma, exact=True)


def wack_from_radius(rho: float, ell: int, pi: np.ndarray) -> WackTerm:
    """Matrix-free wack term: ||M||_2 <= sqrt(pi_max / pi_star) rho^{2l} by similarity."""
    pi = np.asarray(pi, dtype=float)
    norm = math.sqrt(float(pi.max()) / float(pi.min())) * rho ** (2 * ell)
    return WackTerm(M=None, pi=pi, norm=norm, gamma=float(pi.min()) ** -0.5 * norm, exact=False)


# ---------------------------------------------------------------- certificates

@dataclass(frozen=True, eq=False)
class Certificate:
    kind: str
    psi: SpiderMatrix
    wack: WackTerm
    rho: float
    pi_star: float
    n: int
    edges: float
    theta: Optional[float] = None
    iota: Optional[float] = None
    epsilon: Optional[float] = None
    parameters: Optional[ParameterChoice] = None

    @property
    def k(self) -> int:
        return self.psi.spider.k

    @property
    def ell(self) -> int:
        return self.psi.spider.ell

    @property
    def R(self) -> int:
        return self.psi.spider.size

    @property
    def locality(self) -> int:
        return 2 * self.R if self.kind == "maxcut" else self.R

    @property
    def alpha(self) -> float:
        return self.psi.alpha

    @property
    def c0(self) -> float:
        return self.psi.c0

    @property
    def inner_top(self) -> float:
        return self.psi.top

    @property
    def beta_closed(self) -> float:
        return beta_closed(self.k, self.ell, self.pi_star, self.rho)

    @property
    def gamma_closed(self) -> float:
        """pi_*^{-1/2} rho^{2l}: the wack constant the closed-form beta assumes."""
        return self.pi_star ** -0.5 * self.rho ** (2 * self.ell)

    @property
    def beta_sharp(self) -> float:
        return beta_sharp(self.c0, self.inner_top, self.alpha, self.wack.gamma)

    @property
    def beta(self) -> float:
        return min(self.beta_closed, self.beta_sharp)

    @property
    def bound_obj(self) -> float:
        return 0.5 + self.beta_closed / 2

    @property
    def bound_obj_sharp(self) -> float:
        return 0.5 + self.beta_sharp / 2

    @property
    def vacuous(self) -> bool:
        return self.beta >= 1.0

    @property
    def directions(self) -> List[str]:
        return ["K"] if self.kind == "maxcut" else ["+Kbar", "-Kbar"]

    def to_model(self, verification: Optional[VerificationReport] = None) -> CertificateModel:
        return CertificateModel(
            kind=self.kind,
            n=self.n,
            edges=self.edges,
            k=self.k,
            ell=self.ell,
            R=self.R,
            locality=self.locality,
            alpha=self.alpha,
            eta=self.psi.eta,
            c0=self.c0,
            inner=[float(x) for x in self.psi.inner],
            rho=self.rho,
            pi_star=self.pi_star,
            norm_M=self.wack.norm,
            gamma=self.wack.gamma,
            gamma_exact=self.wack.exact,
            beta_closed=self.beta_closed,
            beta_sharp=self.beta_sharp,
            bound_obj=self.bound_obj,
            bound_obj_sharp=self.bound_obj_sharp,
            theta=self.theta,
            iota=self.iota,
            directions=self.directions,
            vacuous=self.vacuous,
            epsilon=self.epsilon,
            parameters=self.parameters,
            verification=verification,
        )


def _resolve_spider(
    G: SignedGraph,
    rho: float,
    k: Optional[int],
    ell: Optional[int],
    epsilon: Optional[float],
    require_corollary: bool,
    max_ell: Optional[int],
    tol: Optional[float],
) -> Tuple[int, int, Optional[ParameterChoice]]:
    if epsilon is not None and (k is not None or ell is not None):
        raise ValueError("give either epsilon or (k, ell), not both")
    params = None
    if epsilon is not None:
        params = select_parameters(epsilon, G.pi_star, rho, max_ell=max_ell, tol=tol)
        k, ell = params.k, params.ell
    elif k is None or ell is None:
        raise ValueError("need epsilon or both k and ell")
    if require_corollary and k < 3 ** ell:
        raise ValueError(f"k = {k} < 3^l = {3 ** ell}; the spider bound on <Psi, A^(0)> needs k >= 3^l")
    return int(k), int(ell), params


def _wack_for(walk: WalkOperator, which: str, ell: int, rho: float) -> WackTerm:
    g = walk.graph
    if g.n <= config.DENSE_EIG_MAX:
        return wack_bound(np.linalg.matrix_power(walk.matrix(which), 2 * ell), g.pi)
    return wack_from_radius(rho, ell, g.pi)


def certify_2xor(
    G: SignedGraph,
    k: Optional[int] = None,
    ell: Optional[int] = None,
    epsilon: Optional[float] = None,
    require_corollary: bool = True,
    max_ell: Optional[int] = None,
    tol: Optional[float] = None,
) -> Certificate:
    walk = walk_operator(G)
    rho = operator_radius(walk, "signed", tol=tol)
    k, ell, params = _resolve_spider(G, rho, k, ell, epsilon, require_corollary, max_ell, tol)
    sm = build_psi(build_spider(k, ell))
    cert = Certificate(
        kind="2xor",
        psi=sm,
        wack=_wack_for(walk, "signed", ell, rho),
        rho=rho,
        pi_star=G.pi_star,
        n=G.n,
        edges=G.num_edges,
        epsilon=epsilon,
        parameters=params,
    )
    _log_certificate(cert)
    return cert


def maxcut_theta(c0: float, alpha: float, inner_top: float) -> Tuple[float, float]:
    """(theta, iota) with iota = (c0 + alpha + top) / top and theta the root of (1/theta + theta)/2 = iota in (0, 1]."""
    if inner_top <= 0:
        raise ValueError("max-cut certificates need k >= 2 (the top inner product vanishes)")
    iota = (c0 + alpha + inner_top) / inner_top
    theta = iota - math.sqrt(iota * iota - 1.0)
    return theta, iota


def certify_maxcut(
    G: SignedGraph,
    k: Optional[int] = None,
    ell: Optional[int] = None,
    epsilon: Optional[float] = None,
    require_corollary: bool = True,
    max_ell: Optional[int] = None,
    tol: Optional[float] = None,
) -> Certificate:
    walk = walk_operator(G)
    rho = operator_radius(walk, "centered", tol=tol)
    k, ell, params = _resolve_spider(G, rho, k, ell, epsilon, require_corollary, max_ell, tol)
    if k < 2:
        raise ValueError("max-cut certificates need k >= 2")
    sm = build_psi(build_spider(k, ell))
    theta, iota = maxcut_theta(sm.c0, sm.alpha, sm.top)
    cert = Certificate(
        kind="maxcut",
        psi=sm,
        wack=_wack_for(walk, "centered", ell, rho),
        rho=rho,
        pi_star=G.pi_star,
        n=G.n,
        edges=G.num_edges,
        theta=theta,
        iota=iota,
        epsilon=epsilon,
        parameters=params,
    )
    _log_certificate(cert)
    return cert


def _log_certificate(cert: Certificate) -> None:
    logger.info(
        "%s certificate k=%d l=%d R=%d rho=%.6g beta=%.6g (sharp %.6g) bound=%.6g",
        cert.kind, cert.k, cert.ell, cert.R, cert.rho, cert.beta_closed, cert.beta_sharp, cert.bound_obj,
    )
    if cert.vacuous:
        logger.warning("%s certificate is vacuous: beta = %.6g >= 1", cert.kind, cert.beta)


# ---------------------------------------------------------------- verification

def aggregation_matrix(inner: np.ndarray, walk: WalkOperator, signed: bool = True) -> np.ndarray:
    """sum_d <Psi, A^(d)> sym(Pi op^d) with op = K-bar (signed) or K."""
    op = walk.Kbar if signed else walk.K
    pi = walk.pi
    power = np.eye(walk.graph.n)
    total = np.zeros_like(power)
    for d, c in enumerate(inner):
        if d:
            power = power @ op
        total += c * sym(pi[:, None] * power)
    return total


def _check(name: str, residual: float, tolerance: float, detail: str = "") -> CheckResult:
    status = "pass" if residual <= tolerance else "fail"
    return CheckResult(name=name, status=status, residual=float(residual), tolerance=tolerance, detail=detail)


def _skipped(name: str, detail: str) -> CheckResult:
    return CheckResult(name=name, status="skipped", detail=detail)


def _scaled(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a - b).max() / max(1.0, float(np.abs(b).max())))


def _psd_checks(cert: Certificate, tol: float) -> List[CheckResult]:
    rep = verify_psi(cert.psi, tol=tol)
    out = [
        CheckResult(
            name="psi_psd",
            status="pass" if rep.passed else "fail",
            residual=max(max(rep.residuals), max(-rep.min_eigenvalue, 0.0)),
            tolerance=tol,
            detail=f"min eigenvalue {rep.min_eigenvalue:.3g}, dense={rep.dense}",
        )
    ]
    if cert.kind == "maxcut":
        sm = cert.psi
        if sm.dense:
            ev = np.linalg.eigvalsh(np.kron(psi_dot_block(cert.theta), sm.Psi))
        else:
            root = np.sqrt(sm.level_gram)
            ev = np.linalg.eigvalsh(np.kron(psi_dot_block(cert.theta), root[:, None] * sm.coefficients * root[None, :]))
        lo = min(float(ev[0]), 0.0)
        out.append(_check("psi_dot_psd", max(-lo, 0.0), tol * max(1.0, float(ev[-1])), f"min eigenvalue {lo:.3g}"))
    return out


def _exhaustive_aggregation(
    cert: Certificate, G: SignedGraph, walk: WalkOperator, tol: float, max_bits: Optional[float]
) -> List[CheckResult]:
    sm = cert.psi
    if sm.Psi is None:
        raise ValueError("exhaustive verification needs a materialised Psi")
    signed = cert.kind == "2xor"
    tree = sm.spider.tree
    try:
        phi, sigma, prob = tree_walk_table(G, tree, max_bits=max_bits)
    except EnumerationTooLarge as err:
        raise EnumerationTooLarge(err.bits, err.limit, "rerun the verification with mode='sampled'") from None
    if not signed:
        sigma = np.ones_like(sigma)

    n = G.n
    psi_mat = sm.Psi
    flat = np.zeros(n * n)
    for i, j in zip(*np.nonzero(psi_mat)):
        w = prob * sigma[:, i] * sigma[:, j] * psi_mat[i, j]
        flat += np.bincount(phi[:, i] * n + phi[:, j], weights=w, minlength=n * n)
    observed = flat.reshape(n, n)
    expected = aggregation_matrix(sm.inner, walk, signed=signed)
    out = [
        _check(
            "aggregation",
            _scaled(observed, expected),
            tol,
            f"{prob.size} homomorphisms, total probability {prob.sum():.12f}",
        )
    ]
    if not signed:
        # independent copies only see the pi marginals, so Z = <1, X>^2 J
        marg = max(
            float(np.abs(np.bincount(phi[:, i], weights=prob, minlength=n) - G.pi).max()) for i in range(tree.size)
        )
        out.append(_check("independent_marginals", marg, tol))
    return out


def _quadratic_value(walk: WalkOperator, inner: np.ndarray, f: np.ndarray, signed: bool) -> float:
    which = "signed" if signed else "walk"
    g = f.copy()
    total = 0.0
    for d, c in enumerate(inner):
        if d:
            g = walk.matvec(which, g)
        total += c * float(np.sum(walk.pi * f * g))
    return total


def _chunk_moments(
    G: SignedGraph, sm: SpiderMatrix, vectors: np.ndarray, signed: bool, seed: int, index: int, size: int
) -> Tuple[np.ndarray, np.ndarray]:
    sp = sm.spider
    phi, sigma = sample_tree_walks(G, sp.tree, size, child_rng(seed, 1, index))
    scale = np.array([1.0] + [sm.alpha ** t / sp.k for t in range(1, sp.ell + 1)])
    sums = np.zeros(len(vectors))
    sumsq = np.zeros(len(vectors))
    for p, f in enumerate(vectors):
        x = f[phi] * sigma if signed else f[phi]
        L = np.column_stack([scale[t] * x[:, sp.levels[t]].sum(axis=1) for t in range(sp.ell + 1)])
        q = np.einsum("ns,st,nt->n", L, sm.coefficients, L)
        sums[p] = q.sum()
        sumsq[p] = (q * q).sum()
    return sums, sumsq


def _sampled_aggregation(
    cert: Certificate, G: SignedGraph, walk: WalkOperator, samples: int, seed: int, jobs: int, vectors: int = 3
) -> List[CheckResult]:
    sm = cert.psi
    signed = cert.kind == "2xor"
    vector_rng = child_rng(seed, 0)
    fs = vector_rng.standard_normal((vectors, G.n))
    expected = np.array([_quadratic_value(walk, sm.inner, f, signed) for f in fs])

    per_chunk = max(1, min(config.SAMPLE_CHUNK, 5_000_000 // sm.spider.size))
    parts = list(chunks(samples, per_chunk))
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda c: _chunk_moments(G, sm, fs, signed, seed, c[0], c[1]), parts))
    sums = sum(r[0] for r in results)
    sumsq = sum(r[1] for r in results)
    mean = sums / samples
    var = np.maximum(sumsq / samples - mean ** 2, 0.0)
    se = np.sqrt(var / samples)
    gap = np.abs(mean - expected)
    z = np.where(se > 0, gap / np.maximum(se, 1e-300), np.where(gap <= config.ABS_TOL, 0.0, np.inf))
    detail = ", ".join(f"vector {i}: {mean[i]:.6g} vs {expected[i]:.6g} (se {se[i]:.2g})" for i in range(vectors))
    return [_check("aggregation_sampled", float(z.max()), SAMPLED_Z_MAX, detail)]


def _wack_checks(cert: Certificate, tol: float) -> List[CheckResult]:
    w = cert.wack
    if w.M is None:
        bound = cert.rho ** (2 * cert.ell)
        return [
            _check(
                "wack",
                max(bound - w.gamma, 0.0),
                tol * max(1.0, w.gamma),
                "matrix-free: gamma bound compared with rho^{2l}",
            ),
            _skipped("wack_closed_row_condition", "matrix-free: rows of M are not formed"),
        ]
    closed = cert.gamma_closed
    pi = w.pi
    _, _, slack = w.diagonals
    pm = sym(pi[:, None] * w.M)
    sos = w.sos_matrix()
    rhs = w.gamma * np.diag(pi) - pm
    r = 1.0 / np.sqrt(pi)
    lam_sos = float(np.linalg.eigvalsh(sym(r[:, None] * sos * r[None, :]))[0])
    lam = float(np.linalg.eigvalsh(sym(r[:, None] * rhs * r[None, :]))[0])
    scale = max(1.0, w.gamma)
    return [
        _check("wack_square_identity", w.square_identity_residual(), tol * max(1.0, float(np.abs(w.M).max()))),
        _check("wack_row_condition", max(w.row_condition(), 0.0), tol * max(1.0, w.gamma ** 2)),
        _check(
            "wack_closed_row_condition",
            max(w.row_condition(closed), 0.0),
            tol * max(1.0, closed ** 2),
            f"gamma_closed {closed:.6g}",
        ),
        _check("wack_slack", max(float((-slack / pi).max()), 0.0), tol * scale),
        _check("wack_decomposition", _scaled(sos + np.diag(slack), rhs), tol),
        _check("wack_squares_psd", max(-lam_sos, 0.0), tol * scale, f"lambda_min {lam_sos:.3g}"),
        _check("wack_domination", max(-lam, 0.0), tol * scale, f"lambda_min {lam:.3g}"),
    ]


def _scalar_checks(cert: Certificate, walk: WalkOperator, tol: float) -> List[CheckResult]:
    k, ell, alpha = cert.k, cert.ell, cert.alpha
    gamma = cert.wack.gamma
    chain = (cert.c0 + cert.inner_top * gamma) / alpha
    closed = k * cert.pi_star ** -0.5 / (2 * alpha) * cert.rho ** (2 * ell) + 2 / alpha
    lower = (cert.c0 + 0.5 * (k - 1) * cert.pi_star ** -0.5 * cert.rho ** (2 * ell)) / alpha
    out = [
        _check("beta_sharp_chain", rel_residual(chain, cert.beta_sharp), tol),
        _check("beta_closed_formula", rel_residual(closed, cert.beta_closed), tol),
        _check("beta_closed_dominates", max(lower - cert.beta_closed, 0.0), tol * max(1.0, lower)),
        _check("beta_at_least_rho", max(cert.rho - cert.beta_closed, 0.0), tol),
        _check("bound_obj", rel_residual(cert.bound_obj, 0.5 + cert.beta_closed / 2), tol),
    ]
    g = walk.graph
    if g.n > config.DENSE_EIG_MAX:
        out.append(_skipped("lambda_min_chain", f"n = {g.n} above the dense limit"))
        return out
    r = np.sqrt(g.pi)
    op = walk.Kbar if cert.kind == "2xor" else walk.K
    s = sym(r[:, None] * op / r[None, :])
    signs = (1.0, -1.0) if cert.kind == "2xor" else (1.0,)
    worst = min(float(np.linalg.eigvalsh(chain * alpha * np.eye(g.n) + sg * alpha * s)[0]) for sg in signs)
    out.append(
        _check("lambda_min_chain", max(-worst, 0.0), tol * max(1.0, chain * alpha), f"lambda_min {worst:.6g}")
    )
    return out


def _maxcut_checks(cert: Certificate, walk: WalkOperator, tol: float) -> List[CheckResult]:
    theta, iota = cert.theta, cert.iota
    c0, alpha, top = cert.c0, cert.alpha, cert.inner_top
    out = [
        _check("theta_range", 0.0 if 0 < theta <= 1 else 1.0, 0.0, f"theta = {theta:.12g}"),
        _check("iota_theta", rel_residual(iota, (1 / theta + theta) / 2), tol),
        _check("annoy_factor", rel_residual(c0 + alpha + top, iota * top), tol),
    ]
    g = walk.graph
    if g.n > config.DENSE_EIG_MAX:
        out.append(_skipped("centered_power_identity", f"n = {g.n} above the dense limit"))
        return out
    pi = g.pi
    ell = cert.ell
    k_pow = np.linalg.matrix_power(walk.K, 2 * ell)
    centered = np.linalg.matrix_power(walk.Kprime, 2 * ell)
    out.append(_check("centered_power_identity", _scaled(centered, k_pow - walk.J), tol))
    out.append(_check("projector_form", _scaled(sym(pi[:, None] * walk.J), np.outer(pi, pi)), tol))
    base = c0 * np.diag(pi) + alpha * sym(pi[:, None] * walk.K)
    annoy = iota * (base + top * sym(pi[:, None] * k_pow)) - (c0 + alpha + top) * np.outer(pi, pi)
    target = base + top * sym(pi[:, None] * centered)
    out.append(_check("annoy_combination", _scaled(annoy / iota, target), tol))
    return out


def verify_certificate(
    cert: Certificate,
    G: SignedGraph,
    mode: str = "exhaustive",
    samples: int = 100_000,
    seed: int = 0,
    jobs: Optional[int] = None,
    tol: Optional[float] = None,
    max_bits: Optional[float] = None,
) -> VerificationReport:
    if mode not in ("exhaustive", "sampled"):
        raise ValueError(f"unknown verification mode '{mode}'")
    if G.n != cert.n:
        raise ValueError(f"certificate was built for n = {cert.n}, graph has n = {G.n}")
    tol = resolve_tol(tol)
    jobs = config.JOBS if jobs is None else jobs
    if mode == "exhaustive":
        limit = config.ENUM_MAX_BITS if max_bits is None else max_bits
        bits = enumeration_bits(cert.psi.spider.tree, G.n)
        if bits > limit:
            raise EnumerationTooLarge(bits, limit, "rerun the verification with mode='sampled'")

    walk = walk_operator(G)
    checks = _psd_checks(cert, tol)
    if mode == "exhaustive":
        checks += _exhaustive_aggregation(cert, G, walk, tol, max_bits)
    else:
        checks += _sampled_aggregation(cert, G, walk, samples, seed, jobs)
    checks += _wack_checks(cert, tol)
    checks += _scalar_checks(cert, walk, tol)
    if cert.kind == "maxcut":
        checks += _maxcut_checks(cert, walk, tol)

    passed = all(c.passed for c in checks)
    failed = [c.name for c in checks if not c.passed]
    if passed:
        logger.info("%s certificate verified (%s, %d checks)", cert.kind, mode, len(checks))
    else:
        logger.warning("%s certificate failed checks: %s", cert.kind, ", ".join(failed))
    return VerificationReport(
        kind=cert.kind,
        mode=mode,
        checks=checks,
        passed=passed,
        samples=samples if mode == "sampled" else None,
        seed=seed if mode == "sampled" else None,
    )
