"""Weighted digraphs, reachability, and the rooted/non-rooted Laplacian split.

Convention: ``weights[i, j] = a_ij`` is the weight of the edge ``j -> i``
(agent ``i`` listens to agent ``j``), so row ``i`` of the Laplacian collects
the in-neighbours of ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import HypothesisError
from .tolerances import zero_tol


@dataclass(frozen=True, eq=False)
class Digraph:
    weights: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("adjacency contains non-finite weights")
        if np.any(w < 0):
            i, j = np.argwhere(w < 0)[0]
            raise ValueError(
                f"negative weight a[{i},{j}]={w[i, j]}: edge weights follow the usual "
                "algebraic graph theory convention a_ij >= 0"
            )
        if np.any(np.diag(w) != 0):
            raise ValueError("self-loops are not allowed (a_ii must be 0)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != w.shape[0]:
                raise ValueError("one label per node required")
            if len(set(labels)) != len(labels):
                raise ValueError("node labels must be unique")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence], labels=None) -> "Digraph":
        """Build from ``(source, target[, weight])`` index triples."""
        w = np.zeros((n, n))
        for e in edges:
            src, dst = int(e[0]), int(e[1])
            w[dst, src] += float(e[2]) if len(e) > 2 else 1.0
        return cls(w, labels)

    @classmethod
    def from_laplacian(cls, lap: np.ndarray, labels=None) -> "Digraph":
        lap = np.asarray(lap, dtype=float)
        w = -lap.copy()
        np.fill_diagonal(w, 0.0)
        w[np.abs(w) < 1e-15] = 0.0
        return cls(w, labels)

    def edges(self) -> list[tuple[int, int, float]]:
        dst, src = np.nonzero(self.weights)
        out = [(int(s), int(d), float(self.weights[d, s])) for d, s in zip(dst, src)]
        return sorted(out)

    def label(self, i: int) -> str:
        return self.labels[i] if self.labels is not None else str(i + 1)

    def __eq__(self, other):
        if not isinstance(other, Digraph):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.weights, other.weights)

    __hash__ = None


def laplacian(g: Digraph) -> np.ndarray:
    """l_ii = sum_j a_ij, l_ij = -a_ij."""
    lap = -g.weights.copy()
    np.fill_diagonal(lap, [math.fsum(row) for row in g.weights])
    return lap


def reachability(g: Digraph) -> np.ndarray:
    """Boolean transitive closure: ``R[i, j]`` iff a directed path leads from i to j.

    Repeated squaring of (I + B), B[i, j] = edge i -> j.
    """
    n = g.n
    r = (g.weights.T > 0) | np.eye(n, dtype=bool)
    while True:
        nxt = (r.astype(np.int64) @ r.astype(np.int64)) > 0
        if np.array_equal(nxt, r):
            return r
        r = nxt


def find_roots(g: Digraph) -> set[int]:
    """Nodes with a directed path to every other node."""
    r = reachability(g)
    return {int(i) for i in np.flatnonzero(r.all(axis=1))}


def has_spanning_tree(g: Digraph) -> bool:
    return bool(find_roots(g))


def is_strongly_connected(g: Digraph) -> bool:
    return len(find_roots(g)) == g.n


def has_spanning_forest(g: Digraph, leaders: Iterable[int]) -> bool:
    """True iff every node is reachable from at least one leader."""
    leaders = sorted(set(int(i) for i in leaders))
    if not leaders:
        raise ValueError("leader set must be nonempty")
    if leaders[0] < 0 or leaders[-1] >= g.n:
        raise ValueError(f"leader index out of range for n={g.n}")
    r = reachability(g)
    return bool(r[leaders, :].any(axis=0).all())


@dataclass(frozen=True, eq=False)
class LaplacianBlocks:
    """Laplacian permuted so the rooted agents come first.

    ``permutation[k]`` is the original index of the agent at position k.
    """

    M: int
    L1: np.ndarray
    L2: np.ndarray
    L3: np.ndarray
    permutation: tuple[int, ...]
    laplacian: np.ndarray

    @property
    def N(self) -> int:
        return len(self.permutation)

    def assemble(self) -> np.ndarray:
        top = np.hstack([self.L1, np.zeros((self.M, self.N - self.M))])
        return np.vstack([top, np.hstack([self.L2, self.L3])])


def decompose(g: Digraph, leaders: Iterable[int] | None = None) -> LaplacianBlocks:
    """Split the Laplacian into rooted (L1), rooted-to-follower (L2) and follower (L3) blocks.

    Without ``leaders`` the rooted set is the structural root set. An explicit
    set (leaderless or containment settings) must not listen to any node
    outside itself, otherwise the block form with a zero upper-right block
    does not exist.
    """
    if leaders is None:
        rooted = sorted(find_roots(g))
        if not rooted:
            raise HypothesisError("graph has no root; pass an explicit leader set")
    else:
        rooted = sorted(set(int(i) for i in leaders))
        if not rooted or rooted[0] < 0 or rooted[-1] >= g.n:
            raise ValueError("leader set must be a nonempty subset of the nodes")
    rest = [i for i in range(g.n) if i not in set(rooted)]
    perm = rooted + rest
    lap = laplacian(g)[np.ix_(perm, perm)]
    m = len(rooted)
    if np.any(lap[:m, m:] != 0):
        raise HypothesisError("a rooted agent receives information from a non-rooted agent")
    lap.setflags(write=False)
    return LaplacianBlocks(
        M=m,
        L1=lap[:m, :m].copy(),
        L2=lap[m:, :m].copy(),
        L3=lap[m:, m:].copy(),
        permutation=tuple(perm),
        laplacian=lap,
    )


def union_graph(gs: Sequence[Digraph]) -> Digraph:
    """Edgewise sum of weights."""
    if not gs:
        raise ValueError("need at least one graph")
    n = gs[0].n
    if any(g.n != n for g in gs):
        raise ValueError("all graphs must have the same node count")
    return Digraph(np.sum([g.weights for g in gs], axis=0), gs[0].labels)


def canonical_sort(values) -> np.ndarray:
    """Sort complex numbers by (real, imag)."""
    values = np.asarray(values, dtype=complex)
    return values[np.lexsort((values.imag, values.real))]


def nonzero_eigen_indices(g: Digraph, tol: float | None = None) -> set[int]:
    """Phi(i): positions s in 1..N-1 of nonzero Laplacian eigenvalues.

    Eigenvalues are sorted by (real, imag); one zero is structural and dropped
    before numbering.
    """
    lap = laplacian(g)
    eig = canonical_sort(np.linalg.eigvals(lap))
    tol = zero_tol(np.linalg.norm(lap, 2)) if tol is None else tol
    zero_pos = int(np.argmin(np.abs(eig)))
    rest = np.delete(eig, zero_pos)
    return {s + 1 for s, lam in enumerate(rest) if abs(lam) > tol}


def jointly_connected(gs: Sequence[Digraph], tol: float | None = None) -> bool:
    if not gs:
        return False
    n = gs[0].n
    if any(g.n != n for g in gs):
        raise ValueError("all graphs must have the same node count")
    covered = set().union(*(nonzero_eigen_indices(g, tol) for g in gs))
    return covered == set(range(1, n))


def laplacian_left_kernel(lap: np.ndarray) -> np.ndarray:
    """Left null vector p of a Laplacian with a simple zero eigenvalue, sum(p) = 1."""
    lap = np.asarray(lap, dtype=float)
    u, s, vt = np.linalg.svd(lap.T)
    tol = zero_tol(s[0] if s.size else 0.0)
    if lap.shape[0] > 1 and s[-2] <= tol:
        raise HypothesisError("zero eigenvalue is not simple (no directed spanning tree)")
    p = vt[-1]
    p = p / p.sum()
    p[np.abs(p) < 1e-14] = 0.0
    return p
