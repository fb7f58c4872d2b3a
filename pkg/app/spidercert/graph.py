"""Signed multigraphs, random-walk operators under the pi inner product, and
stationary tree-indexed walks (enumerated exactly or sampled)."""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import config
from .config import resolve_tol
from .schemas import GraphModel
from .utils import child_rng, sym

logger = logging.getLogger(__name__)

Edge = Tuple[int, int, int, int]
WHICH = ("signed", "centered", "walk")


class EnumerationTooLarge(ValueError):
    def __init__(self, bits: float, limit: float, hint: str = "use sampled mode instead"):
        self.bits = bits
        self.limit = limit
        super().__init__(f"enumeration needs about 2^{bits:.1f} maps (limit 2^{limit:g}); {hint}")


def _as_int(x, what: str) -> int:
    if isinstance(x, bool):
        raise ValueError(f"{what} must be an integer, got {x!r}")
    try:
        i = int(x)
    except (TypeError, ValueError):
        raise ValueError(f"{what} must be an integer, got {x!r}") from None
    if i != x:
        raise ValueError(f"{what} must be an integer, got {x!r}")
    return i


@dataclass(frozen=True, eq=False)
class SignedGraph:
    """Multigraph with one sign per vertex pair. Edges are canonical (u <= v, mult, sign)."""

    n: int
    edges: Tuple[Edge, ...]
    deg: np.ndarray

    @property
    def vol(self) -> int:
        return int(self.deg.sum())

    @property
    def num_edges(self) -> float:
        # loops count as half an edge, so 2|E| = vol
        return self.vol / 2

    @cached_property
    def pi(self) -> np.ndarray:
        return self.deg / float(self.vol)

    @property
    def pi_star(self) -> float:
        return float(self.pi.min())

    @property
    def d_min(self) -> int:
        return int(self.deg.min())

    def is_regular(self) -> bool:
        return bool(np.all(self.deg == self.deg[0]))

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v, m, _ in self.edges:
            a[u, v] += m
            if u != v:
                a[v, u] += m
        return a

    @cached_property
    def signed_adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v, m, s in self.edges:
            a[u, v] += m * s
            if u != v:
                a[v, u] += m * s
        return a

    @cached_property
    def arcs(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Directed arcs (src, dst, mult, sign) sorted by src; a loop appears once."""
        src: List[int] = []
        dst: List[int] = []
        mult: List[int] = []
        sign: List[int] = []
        for u, v, m, s in self.edges:
            src.append(u), dst.append(v), mult.append(m), sign.append(s)
            if u != v:
                src.append(v), dst.append(u), mult.append(m), sign.append(s)
        src_a = np.asarray(src, dtype=np.int64)
        order = np.argsort(src_a, kind="stable")
        return (
            src_a[order],
            np.asarray(dst, dtype=np.int64)[order],
            np.asarray(mult, dtype=np.int64)[order],
            np.asarray(sign, dtype=np.int64)[order],
        )

    @cached_property
    def indptr(self) -> np.ndarray:
        src = self.arcs[0]
        return np.concatenate([[0], np.cumsum(np.bincount(src, minlength=self.n))]).astype(np.int64)

    @cached_property
    def stubs(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(offsets, neighbour, sign): deg(u) slots per vertex, one per unit of multiplicity."""
        src, dst, mult, sign = self.arcs
        nbr = np.repeat(dst, mult)
        sg = np.repeat(sign, mult)
        offsets = np.concatenate([[0], np.cumsum(self.deg)[:-1]]).astype(np.int64)
        return offsets, nbr, sg

    def to_model(self) -> GraphModel:
        return GraphModel(n=self.n, edges=[list(e) for e in self.edges])

    @classmethod
    def from_model(cls, model: GraphModel) -> "SignedGraph":
        return build_graph(model.edges, n=model.n)


def build_graph(edge_list: Iterable[Sequence[int]], n: Optional[int] = None) -> SignedGraph:
    merged: Dict[Tuple[int, int], List[int]] = {}
    for item in edge_list:
        if len(item) != 4:
            raise ValueError(f"edge must be [u, v, multiplicity, sign], got {list(item)!r}")
        u = _as_int(item[0], "vertex")
        v = _as_int(item[1], "vertex")
        mult = _as_int(item[2], "multiplicity")
        sign = _as_int(item[3], "sign")
        if u < 0 or v < 0:
            raise ValueError(f"negative vertex id in edge ({u}, {v})")
        if mult < 1:
            raise ValueError(f"edge ({u}, {v}) has non-positive multiplicity {mult}")
        if sign not in (1, -1):
            raise ValueError(f"edge ({u}, {v}) has sign {sign}; signs must be +1 or -1")
        key = (min(u, v), max(u, v))
        if key in merged:
            if merged[key][1] != sign:
                raise ValueError(f"parallel edges {key} carry conflicting signs")
            merged[key][0] += mult
        else:
            merged[key] = [mult, sign]
    if not merged:
        raise ValueError("graph needs at least one edge")

    top = max(v for _, v in merged) + 1
    if n is None:
        n = top
    elif n < top:
        raise ValueError(f"edge endpoint {top - 1} out of range for n={n}")

    deg = np.zeros(n, dtype=np.int64)
    for (u, v), (mult, _) in merged.items():
        deg[u] += mult
        if u != v:
            deg[v] += mult
    isolated = np.flatnonzero(deg == 0)
    if isolated.size:
        raise ValueError(f"isolated vertices are not allowed: {isolated[:10].tolist()}")

    edges = tuple(sorted((u, v, m, s) for (u, v), (m, s) in merged.items()))
    return SignedGraph(n=n, edges=edges, deg=deg)


@dataclass(frozen=True, eq=False)
class WalkOperator:
    graph: SignedGraph

    @property
    def pi(self) -> np.ndarray:
        return self.graph.pi

    @cached_property
    def K(self) -> np.ndarray:
        return self.graph.adjacency / self.graph.deg[:, None]

    @cached_property
    def Xi(self) -> np.ndarray:
        xi = np.ones((self.graph.n, self.graph.n))
        for u, v, _, s in self.graph.edges:
            xi[u, v] = xi[v, u] = s
        return xi

    @cached_property
    def Kbar(self) -> np.ndarray:
        return self.graph.signed_adjacency / self.graph.deg[:, None]

    @cached_property
    def J(self) -> np.ndarray:
        # pi-projector: J f = <1, f>_pi 1
        return np.tile(self.pi, (self.graph.n, 1))

    @cached_property
    def Kprime(self) -> np.ndarray:
        return self.K - self.J

    def matrix(self, which: str) -> np.ndarray:
        if which == "signed":
            return self.Kbar
        if which == "centered":
            return self.Kprime
        if which == "walk":
            return self.K
        raise ValueError(f"unknown operator '{which}'; expected one of {WHICH}")

    def matvec(self, which: str, x: np.ndarray) -> np.ndarray:
        """Matrix-free product with K-bar, K - J or K (edge arrays, no dense matrix)."""
        if which not in WHICH:
            raise ValueError(f"unknown operator '{which}'; expected one of {WHICH}")
        g = self.graph
        src, dst, mult, sign = g.arcs
        w = mult * sign if which == "signed" else mult
        y = np.bincount(src, weights=w * x[dst], minlength=g.n) / g.deg
        if which == "centered":
            y = y - float(self.pi @ x)
        return y

    def residuals(self) -> Dict[str, float]:
        """Construction invariants; all should vanish to rounding."""
        one = np.ones(self.graph.n)
        pk = self.pi[:, None] * self.K
        pkb = self.pi[:, None] * self.Kbar
        return {
            "row_sums": float(np.abs(self.K @ one - 1).max()),
            "stationary": float(np.abs(self.pi @ self.K - self.pi).max()),
            "pi_sum": abs(float(self.pi.sum()) - 1.0),
            "reversible": float(np.abs(pk - pk.T).max()),
            "signed_self_adjoint": float(np.abs(pkb - pkb.T).max()),
            "signed_is_xi_k": float(np.abs(self.Kbar - self.Xi * self.K).max()),
            "centered_kills_one": float(np.abs(self.Kprime @ one).max()),
        }


def walk_operator(G: SignedGraph) -> WalkOperator:
    walk = WalkOperator(G)
    if G.n <= config.DENSE_EIG_MAX:
        logger.debug("walk operator invariants n=%d %s", G.n, walk.residuals())
    return walk


def spectral_radius(op: np.ndarray, pi: np.ndarray, tol: Optional[float] = None) -> float:
    """Largest |eigenvalue| of an operator self-adjoint under <f, g>_pi."""
    op = np.asarray(op, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or op.shape[0] != pi.size:
        raise ValueError(f"operator shape {op.shape} does not match distribution of size {pi.size}")
    if np.any(pi <= 0):
        raise ValueError("distribution must have full support")
    tol = resolve_tol(tol)

    pm = pi[:, None] * op
    asym = float(np.abs(pm - pm.T).max())
    scale = max(1.0, float(np.abs(op).max()))
    if asym > max(tol * scale * float(pi.max()), config.ABS_TOL):
        raise ValueError(f"operator is not self-adjoint under the pi inner product (residual {asym:.3g})")

    r = np.sqrt(pi)
    s = sym(r[:, None] * op / r[None, :])
    if s.shape[0] <= config.DENSE_EIG_MAX:
        return float(np.abs(np.linalg.eigvalsh(s)).max())
    return power_iteration(lambda x: s @ x, s.shape[0])


def power_iteration(
    matvec: Callable[[np.ndarray], np.ndarray],
    n: int,
    weights: Optional[np.ndarray] = None,
    deflate: Optional[np.ndarray] = None,
    max_iter: int = 2000,
    tol: float = 1e-10,
    seed: int = 0,
) -> float:
    """Dominant |eigenvalue| of a self-adjoint operator under <f, g>_weights.

    Tracks the Rayleigh quotient of the squared operator, so a +rho / -rho pair
    does not stall convergence.
    """
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)

    def dot(a: np.ndarray, b: np.ndarray) -> float:
        return float(np.sum(w * a * b))

    def project(x: np.ndarray) -> np.ndarray:
        if deflate is None:
            return x
        return x - dot(x, deflate) / dot(deflate, deflate) * deflate

    x = project(child_rng(seed, 0).standard_normal(n))
    norm = math.sqrt(dot(x, x))
    if norm == 0.0:
        return 0.0
    x /= norm
    est = 0.0
    for it in range(max_iter):
        y = project(matvec(x))
        ny = math.sqrt(dot(y, y))
        if ny == 0.0:
            return 0.0
        prev, est = est, ny
        x = y / ny
        if it > 2 and abs(est - prev) <= tol * max(est, 1e-300):
            logger.debug("power iteration converged after %d steps: %.12g", it + 1, est)
            return est
    logger.warning("power iteration did not converge in %d steps (last estimate %.6g)", max_iter, est)
    return est


def operator_radius(walk: WalkOperator, which: str = "signed", tol: Optional[float] = None) -> float:
    g = walk.graph
    if g.n <= config.DENSE_EIG_MAX:
        return spectral_radius(walk.matrix(which), g.pi, tol=tol)
    deflate = np.ones(g.n) if which == "centered" else None
    return power_iteration(lambda x: walk.matvec(which, x), g.n, weights=g.pi, deflate=deflate)


def graph_objective(G: SignedGraph, x: Sequence[int]) -> Fraction:
    """Exact 2-XOR value 1/2 + 1/2 <x, K-bar x>_pi of a +-1 assignment."""
    x = [int(v) for v in x]
    if len(x) != G.n or any(v not in (1, -1) for v in x):
        raise ValueError(f"assignment must be {G.n} values in {{+1, -1}}")
    total = 0
    for u, v, m, s in G.edges:
        total += (1 if u == v else 2) * m * s * x[u] * x[v]
    return Fraction(G.vol + total, 2 * G.vol)


# ---------------------------------------------------------------- tree-indexed walks

@dataclass(frozen=True)
class Tree:
    """Rooted tree as a parent array in topological order (parent[0] == -1, parent[i] < i)."""

    parent: Tuple[int, ...]

    def __post_init__(self):
        if not self.parent or self.parent[0] != -1:
            raise ValueError("tree root must be node 0 with parent -1")
        for i, p in enumerate(self.parent[1:], start=1):
            if not 0 <= p < i:
                raise ValueError(f"node {i} has parent {p}; parents must precede children")

    @property
    def size(self) -> int:
        return len(self.parent)

    @classmethod
    def path(cls, edges: int) -> "Tree":
        return cls(tuple([-1] + list(range(edges))))

    def neighbours(self) -> List[List[int]]:
        adj: List[List[int]] = [[] for _ in range(self.size)]
        for i, p in enumerate(self.parent[1:], start=1):
            adj[i].append(p)
            adj[p].append(i)
        return adj

    def reroot(self, root: int) -> Tuple["Tree", Tuple[int, ...]]:
        """Same tree rooted at ``root``; returns it with order[new_index] = old_index."""
        adj = self.neighbours()
        order = [root]
        new_parent = [-1]
        index = {root: 0}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in index:
                    index[v] = len(order)
                    order.append(v)
                    new_parent.append(index[u])
                    queue.append(v)
        return Tree(tuple(new_parent)), tuple(order)


@dataclass(frozen=True)
class WalkSample:
    tree: Tree
    phi: Tuple[int, ...]
    sigma: Tuple[int, ...]
    log_weight: float

    @property
    def probability(self) -> float:
        return math.exp(self.log_weight)


def enumeration_bits(tree: Tree, n: int) -> float:
    return tree.size * math.log2(n) if n > 1 else 0.0


def tree_walk_table(
    G: SignedGraph, tree: Tree, max_bits: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All positive-probability homomorphisms as arrays (phi, sigma, prob).

    Rows of phi/sigma are indexed by tree node; only graph-adjacent images are kept,
    so the table is usually much smaller than n^|T|.
    """
    limit = config.ENUM_MAX_BITS if max_bits is None else max_bits
    bits = enumeration_bits(tree, G.n)
    if bits > limit:
        raise EnumerationTooLarge(bits, limit)

    src_all, dst_all, mult_all, sign_all = G.arcs
    indptr = G.indptr
    deg = G.deg
    phi = np.arange(G.n, dtype=np.int64)[:, None]
    sigma = np.ones((G.n, 1), dtype=np.int64)
    prob = G.pi.copy()
    for child in range(1, tree.size):
        p = tree.parent[child]
        src = phi[:, p]
        counts = indptr[src + 1] - indptr[src]
        rows = np.repeat(np.arange(src.size), counts)
        first = np.repeat(indptr[src], counts)
        within = np.arange(rows.size) - np.repeat(np.cumsum(counts) - counts, counts)
        arc = first + within
        phi = np.column_stack([phi[rows], dst_all[arc]])
        sigma = np.column_stack([sigma[rows], sigma[rows, p] * sign_all[arc]])
        prob = prob[rows] * mult_all[arc] / deg[src[rows]]
    return phi, sigma, prob


def enumerate_tree_walks(G: SignedGraph, tree: Tree, max_bits: Optional[float] = None) -> Iterator[WalkSample]:
    phi, sigma, prob = tree_walk_table(G, tree, max_bits=max_bits)
    for i in range(prob.size):
        yield WalkSample(tree, tuple(int(v) for v in phi[i]), tuple(int(s) for s in sigma[i]), math.log(prob[i]))


def sample_tree_walks(
    G: SignedGraph, tree: Tree, count: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """``count`` independent stationary tree-indexed walks as (phi, sigma) arrays of shape (count, |T|)."""
    offsets, nbr, sg = G.stubs
    cum = np.cumsum(G.pi)
    cum[-1] = 1.0
    phi = np.empty((count, tree.size), dtype=np.int64)
    sigma = np.empty((count, tree.size), dtype=np.int64)
    phi[:, 0] = np.searchsorted(cum, rng.random(count), side="right")
    sigma[:, 0] = 1
    for child in range(1, tree.size):
        p = tree.parent[child]
        src = phi[:, p]
        pick = np.minimum((rng.random(count) * G.deg[src]).astype(np.int64), G.deg[src] - 1)
        slot = offsets[src] + pick
        phi[:, child] = nbr[slot]
        sigma[:, child] = sigma[:, p] * sg[slot]
    return phi, sigma
