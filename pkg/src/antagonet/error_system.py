"""Coordination-error coordinates ``zeta = P xi`` and the error matrix ``A = P Lc Q``.

Agents are indexed in block order: the M rooted agents first, followers after.
``Lc = I - eps * Mc`` is the closed-loop update with coupling matrix
``Mc = [[diag(rho) L1 diag(delta), 0], [L2 diag(delta), L3]]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, NumericalError
from .gains import SystemConfig
from .graph import LaplacianBlocks
from .spectral import eigenvalues
from .tolerances import MATCH_TOL, PRODUCT_TOL


def _check(delta, n: int) -> int:
    m = len(delta)
    if n < 2:
        raise ConfigError("at least two agents are required")
    if not 1 <= m <= n:
        raise ConfigError(f"rooted count {m} must lie in 1..{n}")
    if any(d == 0 for d in delta):
        raise ConfigError("scaling parameters delta_i must be nonzero")
    return m


def build_P(delta, n: int) -> np.ndarray:
    """(N-1) x N difference operator.

    Rooted rows are ``delta_i x_i - delta_(i+1) x_(i+1)``, the row joining the
    last rooted agent to the first follower is ``delta_M x_M - x_(M+1)``, the
    follower rows are plain differences.
    """
    m = _check(delta, n)
    p = np.zeros((n - 1, n))
    for i in range(n - 1):
        p[i, i] = delta[i] if i < m else 1.0
        p[i, i + 1] = -(delta[i + 1] if i + 1 < m else 1.0)
    return p


def build_Q(delta, n: int, exact: bool = False) -> np.ndarray:
    """N x (N-1) right inverse of P: row i holds 1/delta_i (rooted) or 1 from column i on."""
    m = _check(delta, n)
    one = Fraction(1) if exact else 1.0
    q = np.full((n, n - 1), 0 * one, dtype=object if exact else float)
    for i in range(n - 1):
        v = one / (Fraction(delta[i]) if exact else delta[i]) if i < m else one
        q[i, i:] = v
    return q


def nu_vector(delta, n: int) -> np.ndarray:
    """Last column of Q P: -[1/delta_1, ..., 1/delta_M, 1, ..., 1] (length N-1)."""
    m = _check(delta, n)
    return -np.array([1.0 / delta[i] if i < m else 1.0 for i in range(n - 1)])


def coupling_matrix(blocks: LaplacianBlocks, cfg: SystemConfig) -> np.ndarray:
    _match(blocks, cfg)
    d = np.asarray(cfg.delta)
    top = np.hstack([np.asarray(cfg.rho)[:, None] * blocks.L1 * d, np.zeros((cfg.M, cfg.N - cfg.M))])
    bottom = np.hstack([blocks.L2 * d, blocks.L3])
    return np.vstack([top, bottom])


def update_matrix(blocks: LaplacianBlocks, cfg: SystemConfig) -> np.ndarray:
    return np.eye(cfg.N) - cfg.epsilon * coupling_matrix(blocks, cfg)


def _match(blocks: LaplacianBlocks, cfg: SystemConfig) -> None:
    if blocks.M != cfg.M or blocks.N != cfg.N:
        raise ConfigError(
            f"blocks have M={blocks.M}, N={blocks.N}; config has M={cfg.M}, N={cfg.N}"
        )


@dataclass(frozen=True, eq=False)
class ErrorSystem:
    P: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    A: np.ndarray
    update: np.ndarray = field(repr=False)
    coupling: np.ndarray = field(repr=False)

    def eigenvalues(self) -> np.ndarray:
        return eigenvalues(self.A)

    def to_dict(self) -> dict:
        return {
            "P": self.P.tolist(),
            "Q": self.Q.tolist(),
            "A": self.A.tolist(),
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues()],
        }


def build_A(blocks: LaplacianBlocks, cfg: SystemConfig) -> ErrorSystem:
    """A = P Lc Q, checked against A P = P Lc."""
    _match(blocks, cfg)
    if cfg.N < 2:
        raise ConfigError("at least two agents are required")
    p = build_P(cfg.delta, cfg.N)
    q = build_Q(cfg.delta, cfg.N)
    mc = coupling_matrix(blocks, cfg)
    lc = np.eye(cfg.N) - cfg.epsilon * mc
    a = p @ lc @ q
    resid = np.max(np.abs(a @ p - p @ lc))
    if resid > PRODUCT_TOL * (1 + np.max(np.abs(lc))) * (1 + np.max(np.abs(p))) ** 2:
        raise NumericalError(f"A P - P Lc residual {resid:.3e}")
    return ErrorSystem(p, q, a, lc, mc)


def build_A_elementwise(blocks: LaplacianBlocks, cfg: SystemConfig) -> np.ndarray:
    """A entry by entry from the Laplacian, without forming P, Q or Lc."""
    _match(blocks, cfg)
    n, m, eps = cfg.N, cfg.M, cfg.epsilon
    lap = blocks.laplacian
    w = np.array([cfg.rho[i] * cfg.delta[i] for i in range(m)])
    a = np.zeros((n - 1, n - 1))
    for i in range(n - 1):
        for j in range(n - 1):
            if i < m - 1:
                s = 0.0 if j >= m else sum(
                    w[i + 1] * lap[i + 1, h] - w[i] * lap[i, h] for h in range(j + 1)
                )
            elif i == m - 1:
                s = sum(lap[i + 1, h] - w[i] * lap[i, h] for h in range(min(j, m - 1) + 1))
                s += sum(lap[i + 1, h] for h in range(m, j + 1))
            else:
                s = sum(lap[i + 1, h] - lap[i, h] for h in range(j + 1))
            a[i, j] = (i == j) + eps * s
    return a


def match_eigenvalues(x, y) -> float:
    """Largest pair distance under the optimal one-to-one matching (inf if sizes differ)."""
    x, y = np.asarray(x, complex), np.asarray(y, complex)
    if x.size != y.size:
        return float("inf")
    if x.size == 0:
        return 0.0
    cost = np.abs(x[:, None] - y[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def eigen_correspondence(update, a, tol: float = MATCH_TOL) -> bool:
    """Eigenvalues of Lc equal those of A plus one extra eigenvalue 1."""
    lhs = eigenvalues(update)
    rhs = np.append(eigenvalues(a), 1.0)
    return match_eigenvalues(lhs, rhs) <= tol
