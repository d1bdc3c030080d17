"""Bridge from edge-signed (Altafini-type) networks to the node-scaled protocol.

A signed adjacency ``a*`` has Laplacian ``l*_ii = sum_j |a*_ij|``,
``l*_ij = -a*_ij``. If the signed graph is structurally balanced there is a
+-1 diagonal gauge ``D`` with ``D L* D`` an ordinary Laplacian, and choosing
gains and scalings equal to ``D`` reproduces ``L*`` as the coupling matrix.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .errors import ConfigError, DegenerateSpectrumError
from .gains import SystemConfig, epsilon_bound
from .graph import Digraph, LaplacianBlocks, decompose
from .error_system import coupling_matrix


def signed_laplacian(a_signed) -> np.ndarray:
    a = np.asarray(a_signed, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("signed adjacency must be square")
    if np.any(np.diag(a) != 0):
        raise ValueError("self-loops are not allowed")
    lap = -a.copy()
    np.fill_diagonal(lap, np.abs(a).sum(axis=1))
    return lap


def signed_adjacency(lap_signed) -> np.ndarray:
    a = -np.asarray(lap_signed, dtype=float).copy()
    np.fill_diagonal(a, 0.0)
    return a


def altafini_gauge(lap_signed) -> tuple[np.ndarray | None, bool]:
    """(D, balanced) by 2-colouring the sign pattern; D is None when unbalanced.

    Opposite signs on the two arcs of a digon count as imbalance.
    """
    a = signed_adjacency(lap_signed)
    n = a.shape[0]
    sgn = np.sign(a)
    both = (sgn != 0) & (sgn.T != 0)
    if np.any(both & (sgn != sgn.T)):
        return None, False
    s = np.where(sgn != 0, sgn, sgn.T)
    colour = np.zeros(n, dtype=int)
    for start in range(n):
        if colour[start]:
            continue
        colour[start] = 1
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(s[i]):
                want = colour[i] * int(s[i, j])
                if colour[j] == 0:
                    colour[j] = want
                    queue.append(j)
                elif colour[j] != want:
                    return None, False
    return np.diag(colour.astype(float)), True


def gauge_model(lap_signed) -> tuple[LaplacianBlocks, SystemConfig]:
    """Node-scaled model whose coupling matrix equals the signed Laplacian.

    Every agent is treated as rooted, with rho = delta = diag(D). The step
    size of the returned config is 0; set it with ``with_epsilon``.
    """
    d, balanced = altafini_gauge(lap_signed)
    if not balanced:
        raise ConfigError("signed graph is not structurally balanced")
    lap = d @ np.asarray(lap_signed, float) @ d
    g = Digraph.from_laplacian(lap)
    n = g.n
    blocks = decompose(g, leaders=range(n))
    diag = tuple(np.diag(d))
    return blocks, SystemConfig(diag, diag, 0.0, n)


def euler_matrix(lap_signed, epsilon: float) -> np.ndarray:
    """Forward-Euler step of xdot = -L* x."""
    lap = np.asarray(lap_signed, float)
    return np.eye(lap.shape[0]) - epsilon * lap


def altafini_limit(lap_signed, xi0, tol: float = 1e-9) -> np.ndarray:
    """Limit of xdot = -L* x for a signed Laplacian with at most a simple zero eigenvalue.

    ``r (l . xi0) / (l . r)`` from the right and left null vectors, or 0 when
    L* is nonsingular.
    """
    lap = np.asarray(lap_signed, float)
    right = null_space(lap, rcond=tol)
    left = null_space(lap.T, rcond=tol)
    if right.shape[1] == 0:
        return np.zeros(lap.shape[0])
    if right.shape[1] > 1:
        raise DegenerateSpectrumError("zero eigenvalue of the signed Laplacian is not simple")
    r, l = right[:, 0], left[:, 0]
    return r * (l @ np.asarray(xi0, float)) / (l @ r)


@dataclass(frozen=True, eq=False)
class Embedding:
    """Augmented network: virtual leader at position 0 followed by the kept agents."""

    graph: Digraph
    blocks: LaplacianBlocks
    cfg: SystemConfig
    kept: tuple[int, ...]
    ell: np.ndarray = field(repr=False)
    leader_value: float
    target: np.ndarray = field(repr=False)

    def initial_state(self, agents=None) -> np.ndarray:
        """Leader value first; agent entries default to 0 (the limit does not depend on them)."""
        rest = np.zeros(len(self.kept)) if agents is None else np.asarray(agents, float)
        return np.concatenate([[self.leader_value], rest])


def interval_bipartite_embed(
    lap_signed,
    xi_inf,
    delta0: float = 1.0,
    leader_value: float = 1.0,
    ell=None,
    tol: float = 1e-9,
) -> Embedding:
    """Build a node-scaled network whose agents converge to ``xi_inf``.

    Agents with zero target are dropped. A virtual leader 0 with constant state
    ``leader_value`` feeds each kept agent i with weight ``ell_i``; scaling
    ``delta_i = delta0 * iota_i`` with ``iota_i = leader_value / xi_inf_i``.
    All agents are rooted, gains are sgn(delta) and the step is half the
    admissible bound.
    """
    xi_inf = np.asarray(xi_inf, float)
    lap = np.asarray(lap_signed, float)
    if delta0 == 0 or leader_value == 0:
        raise ConfigError("delta0 and the leader value must be nonzero")
    kept = tuple(int(i) for i in np.flatnonzero(np.abs(xi_inf) > tol * (1 + np.max(np.abs(xi_inf)))))
    if not kept:
        raise DegenerateSpectrumError("target limit is identically zero")
    ell = np.ones(len(kept)) if ell is None else np.asarray(ell, float)
    if ell.shape != (len(kept),) or np.any(ell < 0) or not np.any(ell > 0):
        raise ConfigError("ell needs one nonnegative entry per kept agent, not all zero")
    n = len(kept) + 1
    w = np.zeros((n, n))
    w[1:, 1:] = np.abs(signed_adjacency(lap))[np.ix_(kept, kept)]
    w[1:, 0] = ell
    g = Digraph(w, labels=["0"] + [str(i + 1) for i in kept])
    iota = leader_value / xi_inf[list(kept)]
    delta = np.concatenate([[delta0], delta0 * iota])
    blocks = decompose(g, leaders=range(n))
    cfg = SystemConfig(tuple(delta), tuple(np.sign(delta)), 0.0, n)
    eps = 0.5 * epsilon_bound(coupling_matrix(blocks, cfg))
    return Embedding(g, blocks, cfg.with_epsilon(eps), kept, ell, float(leader_value), xi_inf)
