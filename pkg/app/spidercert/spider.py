"""The (k, l)-spider and the PSD matrix Psi whose distance-class inner products drive
the certificates.

Psi lives in the span of the level vectors mu_t = (alpha^t / k) 1_{V_t}, so every
quantity has a level form: Psi = sum_{s,t} C[s, t] mu_s mu_t^T for an (l+1)x(l+1)
coefficient matrix C. The dense S x S matrices are only built while the spider is
small enough; otherwise the level algebra answers the same questions exactly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional

import numpy as np

from . import config
from .config import resolve_tol
from .graph import Tree
from .schemas import PsiReport
from .utils import rel_residual

logger = logging.getLogger(__name__)


def spider_alpha(k: int, ell: int) -> float:
    return math.exp(math.log(k) / (2 * ell))


@dataclass(frozen=True)
class Spider:
    k: int
    ell: int

    @property
    def size(self) -> int:
        return self.k * self.ell + 1

    @property
    def root(self) -> int:
        return 0

    @property
    def diameter(self) -> int:
        return 2 * self.ell if self.k >= 2 else self.ell

    def vertex(self, leg: int, depth: int) -> int:
        if depth == 0:
            return 0
        if not (0 <= leg < self.k and 1 <= depth <= self.ell):
            raise ValueError(f"no vertex at leg {leg}, depth {depth}")
        return 1 + leg * self.ell + (depth - 1)

    @cached_property
    def depth(self) -> np.ndarray:
        d = np.zeros(self.size, dtype=np.int64)
        d[1:] = np.tile(np.arange(1, self.ell + 1), self.k)
        return d

    @cached_property
    def leg(self) -> np.ndarray:
        g = np.full(self.size, -1, dtype=np.int64)
        g[1:] = np.repeat(np.arange(self.k), self.ell)
        return g

    @cached_property
    def levels(self) -> List[np.ndarray]:
        return [np.flatnonzero(self.depth == t) for t in range(self.ell + 1)]

    @property
    def tips(self) -> np.ndarray:
        return self.levels[self.ell]

    @cached_property
    def dist(self) -> np.ndarray:
        d = self.depth
        same = self.leg[:, None] == self.leg[None, :]
        return np.where(same, np.abs(d[:, None] - d[None, :]), d[:, None] + d[None, :])

    def distance_matrix(self, d: int) -> np.ndarray:
        return (self.dist == d).astype(float)

    @cached_property
    def tree(self) -> Tree:
        parent = [-1]
        for j in range(self.k):
            for t in range(1, self.ell + 1):
                parent.append(0 if t == 1 else self.vertex(j, t - 1))
        return Tree(tuple(parent))


def build_spider(k: int, ell: int) -> Spider:
    if int(k) != k or int(ell) != ell or k < 1 or ell < 1:
        raise ValueError(f"spider needs integer k >= 1 and l >= 1, got k={k}, l={ell}")
    return Spider(int(k), int(ell))


def eta_coefficient(k: int, ell: int, alpha: float) -> float:
    # sum_{j=0}^{l-2} alpha^{2j} / (k-1); zero when l = 1
    return sum(alpha ** (2 * j) for j in range(ell - 1)) / (k - 1)


def level_coefficients(k: int, ell: int, alpha: float) -> np.ndarray:
    """C with Psi = sum_{s,t} C[s, t] mu_s mu_t^T."""
    size = ell + 1
    chi = np.zeros(size)
    chi[0] = chi[1] = 1.0
    c = np.outer(chi, chi)
    for t in range(ell):
        psi = np.zeros(size)
        psi[t] = 1.0
        if t + 2 <= ell:
            psi[t + 2] = -1.0
        c += np.outer(psi, psi)
    c *= 0.5
    c[1, 1] += eta_coefficient(k, ell, alpha)
    return c


def level_norms(k: int, ell: int, alpha: float) -> np.ndarray:
    """|mu_t|^2: 1 at the root, alpha^{2t}/k on level t."""
    g = np.array([alpha ** (2 * t) / k for t in range(ell + 1)])
    g[0] = 1.0
    return g


def intermediate_inner_products(spider: Spider, alpha: float) -> np.ndarray:
    """T[s, t, d] = mu_s^T A^(d) mu_t from the level/distance case analysis."""
    k, ell = spider.k, spider.ell
    table = np.zeros((ell + 1, ell + 1, 2 * ell + 1))
    for s in range(ell + 1):
        for t in range(ell + 1):
            a = alpha ** (s + t)
            if s == 0 or t == 0:
                table[s, t, s + t] = a
            else:
                table[s, t, abs(s - t)] += a / k
                table[s, t, s + t] += (1.0 - 1.0 / k) * a
    return table


def theorem_inner_products(k: int, ell: int, alpha: float) -> np.ndarray:
    a2 = alpha * alpha
    top = alpha ** (2 * ell)
    out = np.zeros(2 * ell + 1)
    out[0] = 1.0 + top / (2 * k) + (top - a2) / ((k - 1) * (a2 - 1))
    out[1] = alpha
    out[2 * ell] = 0.5 * (1.0 - 1.0 / k) * top
    return out


def tilde_inner_products(k: int, ell: int, alpha: float) -> np.ndarray:
    """Closed forms of <Psi~, A^(d)> for Psi~ = chi chi^T + sum_t psi_t psi_t^T."""
    top = alpha ** (2 * ell)
    mid = sum(alpha ** (2 * j) for j in range(1, ell))
    out = np.zeros(2 * ell + 1)
    out[0] = 2.0 + (2.0 / k) * mid + top / k
    out[1] = 2.0 * alpha
    if ell >= 2:
        out[2] = -(2.0 / k) * mid
    out[2 * ell] = (1.0 - 1.0 / k) * top
    return out


def corollary_c0(k: int, ell: int) -> float:
    return float(theorem_inner_products(k, ell, spider_alpha(k, ell))[0])


@dataclass(frozen=True, eq=False)
class SpiderMatrix:
    spider: Spider
    alpha: float
    eta: float
    coefficients: np.ndarray
    table: np.ndarray
    Psi: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dense(self) -> bool:
        return self.Psi is not None

    @property
    def inner(self) -> np.ndarray:
        """<Psi, A^(d)> for d = 0..2l from the level algebra."""
        return np.einsum("st,std->d", self.coefficients, self.table)

    @property
    def c0(self) -> float:
        return float(self.inner[0])

    @property
    def top(self) -> float:
        return float(self.inner[-1])

    @cached_property
    def mu(self) -> np.ndarray:
        sp = self.spider
        m = np.zeros((sp.ell + 1, sp.size))
        m[0, sp.root] = 1.0
        for t in range(1, sp.ell + 1):
            m[t, sp.levels[t]] = self.alpha ** t / sp.k
        return m

    @property
    def chi(self) -> np.ndarray:
        return self.mu[0] + self.mu[1]

    @property
    def psi(self) -> List[np.ndarray]:
        ell = self.spider.ell
        out = []
        for t in range(ell):
            v = self.mu[t].copy()
            if t + 2 <= ell:
                v -= self.mu[t + 2]
            out.append(v)
        return out

    def A(self, d: int) -> np.ndarray:
        return self.spider.distance_matrix(d)

    @property
    def level_gram(self) -> np.ndarray:
        return level_norms(self.spider.k, self.spider.ell, self.alpha)


def _dense_psi(sm: SpiderMatrix) -> np.ndarray:
    chi = sm.chi
    psi_mat = np.outer(chi, chi)
    for v in sm.psi:
        psi_mat += np.outer(v, v)
    psi_mat *= 0.5
    psi_mat += sm.eta * np.outer(sm.mu[1], sm.mu[1])
    return psi_mat


def build_psi(spider: Spider, alpha: Optional[float] = None, dense: Optional[bool] = None) -> SpiderMatrix:
    k, ell = spider.k, spider.ell
    if k < 2:
        raise ValueError("Psi needs k >= 2 legs (eta has a 1/(k-1) factor)")
    if alpha is None:
        alpha = spider_alpha(k, ell)
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if math.isclose(alpha, 1.0, rel_tol=1e-15, abs_tol=0.0):
        raise ValueError("alpha = 1 makes eta singular")
    if dense is None:
        dense = spider.size <= config.DENSE_PSI_MAX

    sm = SpiderMatrix(
        spider=spider,
        alpha=alpha,
        eta=eta_coefficient(k, ell, alpha),
        coefficients=level_coefficients(k, ell, alpha),
        table=intermediate_inner_products(spider, alpha),
    )
    if dense:
        sm = SpiderMatrix(sm.spider, sm.alpha, sm.eta, sm.coefficients, sm.table, Psi=_dense_psi(sm))
    logger.debug("built Psi k=%d l=%d alpha=%.6g dense=%s", k, ell, alpha, dense)
    return sm


def build_psi_dot(sm: SpiderMatrix, theta: float) -> np.ndarray:
    """1/2 [[Psi/theta, -Psi], [-Psi, theta Psi]] on two copies of the spider."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if sm.Psi is None:
        raise ValueError("Psi was not materialised; use psi_dot_block for the level form")
    return np.kron(psi_dot_block(theta), sm.Psi)


def psi_dot_block(theta: float) -> np.ndarray:
    # rank one: 1/2 v v^T with v = (theta^-1/2, -theta^1/2)
    return 0.5 * np.array([[1.0 / theta, -1.0], [-1.0, theta]])


def _frobenius_by_distance(mat: np.ndarray, spider: Spider) -> np.ndarray:
    return np.bincount(spider.dist.ravel(), weights=mat.ravel(), minlength=2 * spider.ell + 1)


def verify_psi(sm: SpiderMatrix, tol: Optional[float] = None) -> PsiReport:
    tol = resolve_tol(tol)
    sp = sm.spider
    k, ell, alpha = sp.k, sp.ell, sm.alpha
    formula = theorem_inner_products(k, ell, alpha)
    tilde_formula = tilde_inner_products(k, ell, alpha)

    if sm.dense:
        psi_mat = sm.Psi
        inner = _frobenius_by_distance(psi_mat, sp)
        mu1 = sm.mu[1]
        tilde = _frobenius_by_distance(2.0 * (psi_mat - sm.eta * np.outer(mu1, mu1)), sp)
        scale = max(1.0, float(np.abs(psi_mat).max()))
        symmetric = float(np.abs(psi_mat - psi_mat.T).max()) <= tol * scale
        ev = np.linalg.eigvalsh(0.5 * (psi_mat + psi_mat.T))
        lo, hi = float(ev[0]), float(ev[-1])
    else:
        c = sm.coefficients
        inner = sm.inner
        c_tilde = 2.0 * c
        c_tilde[1, 1] -= 2.0 * sm.eta
        tilde = np.einsum("st,std->d", c_tilde, sm.table)
        symmetric = bool(np.allclose(c, c.T, rtol=0.0, atol=tol))
        root = np.sqrt(sm.level_gram)
        ev = np.linalg.eigvalsh(root[:, None] * c * root[None, :])
        # Psi has rank <= l+1 < |S|, so 0 is also in its spectrum
        lo, hi = min(float(ev[0]), 0.0), float(ev[-1])

    residuals = [rel_residual(a, b) for a, b in zip(inner, formula)]
    tilde_res = [rel_residual(a, b) for a, b in zip(tilde, tilde_formula)]
    psd = lo >= -tol * max(abs(hi), 1.0)

    applicable = k >= 3 ** ell and math.isclose(alpha, spider_alpha(k, ell), rel_tol=1e-12)
    corollary_ok = None
    if applicable:
        corollary_ok = bool(1.5 - tol <= inner[0] <= 2.0 + tol)

    passed = (
        max(residuals) <= tol
        and max(tilde_res) <= tol
        and psd
        and symmetric
        and corollary_ok is not False
    )
    if not passed:
        logger.warning("Psi check failed for k=%d l=%d: residual %.3g, min eig %.3g", k, ell, max(residuals), lo)
    return PsiReport(
        k=k,
        ell=ell,
        alpha=alpha,
        eta=sm.eta,
        size=sp.size,
        dense=sm.dense,
        inner=[float(x) for x in inner],
        formula=[float(x) for x in formula],
        residuals=residuals,
        tilde_inner=[float(x) for x in tilde],
        tilde_formula=[float(x) for x in tilde_formula],
        min_eigenvalue=lo,
        max_eigenvalue=hi,
        psd=bool(psd),
        symmetric=bool(symmetric),
        corollary_applicable=applicable,
        corollary_ok=corollary_ok,
        passed=bool(passed),
    )


def spider_dump(sm: SpiderMatrix) -> dict:
    """Audit record: parameters, level coefficients and the distance-class table."""
    return {
        "k": sm.spider.k,
        "ell": sm.spider.ell,
        "alpha": sm.alpha,
        "eta": sm.eta,
        "coefficients": sm.coefficients.tolist(),
        "level_norms": sm.level_gram.tolist(),
        "inner": [float(x) for x in sm.inner],
        "formula": [float(x) for x in theorem_inner_products(sm.spider.k, sm.spider.ell, sm.alpha)],
    }
