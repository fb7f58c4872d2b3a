"""Explicit Sherali-Adams feasible points for 2-XOR: pseudo-moments E[x_i x_j] = f(b_ij / r)
with f(z) = 1 - (2/pi) arccos(z) and r = 2R + 3."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from . import config
from .csp import XorInstance
from .schemas import EmbeddabilityReport, FPropertiesReport, LowerBoundReport
from .utils import child_rng

logger = logging.getLogger(__name__)

EXHAUSTIVE_SUBSETS_MAX = 4096


def f(z):
    return 1.0 - (2.0 / math.pi) * np.arccos(np.clip(z, -1.0, 1.0))


def radius(R: int) -> int:
    if R < 1:
        raise ValueError(f"round count must be >= 1, got {R}")
    return 2 * R + 3


def constraint_matrix(I: XorInstance) -> np.ndarray:
    """Symmetric +-1 pair matrix of an arity-2 instance with unit weights."""
    if I.k != 2:
        raise ValueError(f"feasible points are built for 2-XOR, got arity {I.k}")
    if I.num_terms and np.any(np.abs(I.weights) != 1):
        raise ValueError("feasible points need +-1 weights")
    b = np.zeros((I.n, I.n), dtype=np.int64)
    for (i, j), w in zip(I.digits(), I.weights):
        if i == j:
            raise ValueError(f"self-pair ({i}, {i}) has no pseudo-moment")
        if b[i, j] not in (0, w):
            raise ValueError(f"pair ({i}, {j}) appears with both signs")
        b[i, j] = b[j, i] = w
    return b


@dataclass(frozen=True, eq=False)
class PseudoMoments:
    R: int
    r: int
    b: np.ndarray
    values: np.ndarray

    def moment(self, i: int, j: int) -> float:
        return float(self.values[i, j])


def cmm_point(I: XorInstance, R: int) -> PseudoMoments:
    r = radius(R)
    b = constraint_matrix(I)
    values = f(b / r)
    np.fill_diagonal(values, 1.0)
    return PseudoMoments(R, r, b, values)


def feasible_value(I: XorInstance, pm: PseudoMoments) -> float:
    if I.num_terms == 0:
        return 0.5
    i, j = np.divmod(I.codes, I.n)
    return float(0.5 + 0.5 * np.mean(I.weights * pm.values[i, j]))


def _subsets(n: int, size: int, spot_checks: int, seed: int) -> Tuple[bool, Iterator[np.ndarray]]:
    total = sum(math.comb(n, j) for j in range(1, size + 1))
    if total <= EXHAUSTIVE_SUBSETS_MAX:
        it = (np.array(s) for j in range(1, size + 1) for s in itertools.combinations(range(n), j))
        return True, it
    rng = child_rng(seed, 0)
    return False, (np.sort(rng.choice(n, size=size, replace=False)) for _ in range(spot_checks))


def check_embeddability(
    I: XorInstance,
    R: int,
    subset_size: Optional[int] = None,
    spot_checks: int = 200,
    seed: int = 0,
    tol: Optional[float] = None,
) -> EmbeddabilityReport:
    """Diagonal dominance of I + B_S / r on every small subset, plus a Cholesky spot check."""
    r = radius(R)
    b = constraint_matrix(I)
    s = min(subset_size or r, I.n)
    deg = (b != 0).sum(axis=1)
    row_sum = float(np.minimum(deg, s - 1).max(initial=0)) / r
    if math.isclose(row_sum, 1.0, rel_tol=0, abs_tol=config.ABS_TOL):
        dominance = "boundary"
    elif row_sum < 1:
        dominance = "strict"
    else:
        dominance = "fail"

    tol = config.ABS_TOL if tol is None else tol
    exhaustive, subsets = _subsets(I.n, s, spot_checks, seed)
    checked, failures, lam = 0, 0, math.inf
    for S in subsets:
        M = np.eye(S.size) + b[np.ix_(S, S)] / r
        checked += 1
        try:
            np.linalg.cholesky(M)
            lam = min(lam, float(np.linalg.eigvalsh(M)[0]))
        except np.linalg.LinAlgError:
            failures += 1
            lam = min(lam, float(np.linalg.eigvalsh(M)[0]))
    passed = dominance != "fail" and lam >= -tol
    if not passed:
        logger.warning("embeddability fails at R=%d: row sum %.4g, min eigenvalue %.4g", R, row_sum, lam)
    return EmbeddabilityReport(
        R=R,
        r=r,
        subset_size=s,
        max_degree=int(deg.max(initial=0)),
        max_row_sum=row_sum,
        dominance=dominance,
        exhaustive=exhaustive,
        subsets_checked=checked,
        min_eigenvalue=lam if checked else 1.0,
        factorization_failures=failures,
        passed=passed,
    )


def f_properties(points: int = 2001) -> FPropertiesReport:
    z = np.linspace(-1.0, 1.0, points)
    odd = float(np.abs(f(z) + f(-z)).max())
    pos = np.linspace(0.0, 1.0, points)
    g = f(pos) - (2.0 / math.pi) * pos
    lower = float(g.min())
    step = float(np.diff(g).min())
    passed = odd <= 1e-12 and lower >= -1e-12 and step >= -1e-12
    return FPropertiesReport(
        points=points, odd_max_residual=odd, lower_min_slack=lower, monotone_min_step=step, passed=passed
    )


def guaranteed_value(R: int) -> float:
    return 0.5 + (1.0 / math.pi) / radius(R)


def lb_simplification(R_max: int = 1000) -> Dict[str, float]:
    """Checks 1/2 + (2/pi)/(2R+3) >= 1/2 + 1/(pi R) - 1/(2R^2) for R = 1..R_max."""
    R = np.arange(1, R_max + 1, dtype=float)
    margin = (2 / math.pi) / (2 * R + 3) - (1 / (math.pi * R) - 1 / (2 * R ** 2))
    return {"R_max": float(R_max), "min_margin": float(margin.min()), "failures": float((margin < -1e-15).sum())}


def lower_bound(I: XorInstance, R: int, subset_size: Optional[int] = None, seed: int = 0) -> LowerBoundReport:
    pm = cmm_point(I, R)
    value = feasible_value(I, pm)
    guaranteed = guaranteed_value(R)
    emb = check_embeddability(I, R, subset_size=subset_size, seed=seed)
    meets = I.num_terms == 0 or value >= guaranteed - 1e-12
    logger.info("feasible point at R=%d: value %.6g (guarantee %.6g)", R, value, guaranteed)
    return LowerBoundReport(
        R=R,
        r=pm.r,
        constraints=I.num_terms,
        value=value,
        guaranteed=guaranteed,
        meets_guarantee=meets,
        embeddability=emb,
    )
