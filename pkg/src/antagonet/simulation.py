"""Forward simulation of the scaled-coordination protocol and finite-horizon verdicts.

States are kept in block order (rooted agents first) with ``permutation``
mapping back to the input node indices.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .error_system import build_A
from .errors import ConfigError, DegenerateSpectrumError, HypothesisError, NumericalError
from .gains import SystemConfig, epsilon_bound
from .graph import LaplacianBlocks, laplacian_left_kernel
from .spectral import eigenvalues
from .tolerances import ZERO_TOL

DIVERGENCE_CAP = 1e12
STEP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray = field(repr=False)
    errors: np.ndarray = field(repr=False)
    schedule: tuple[int, ...]
    delta: tuple[float, ...]
    permutation: tuple[int, ...]
    truncated_at: int | None = None

    @property
    def truncated(self) -> bool:
        return self.truncated_at is not None

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1

    def scaled(self) -> np.ndarray:
        """delta_i xi_i for rooted agents, xi_j for followers."""
        m = len(self.delta)
        s = self.states.copy()
        s[:, :m] *= np.asarray(self.delta)
        return s

    def to_csv(self, labels: Sequence[str] | None = None) -> str:
        n = self.states.shape[1]
        names = [labels[p] if labels else str(p + 1) for p in self.permutation]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "sigma"] + [f"xi_{s}" for s in names] + [f"zeta_{i + 1}" for i in range(n - 1)])
        for k in range(self.states.shape[0]):
            sig = self.schedule[k] if k < len(self.schedule) else ""
            w.writerow(
                [k, sig]
                + [repr(float(x)) for x in self.states[k]]
                + [repr(float(x)) for x in self.errors[k]]
            )
        if self.truncated:
            w.writerow([f"# truncated at k={self.truncated_at}: |xi| exceeded {DIVERGENCE_CAP:g} or became non-finite"])
        return buf.getvalue()

    def plot_csv(self, labels: Sequence[str] | None = None) -> str:
        """Raw and scaled per-agent series plus the active mode."""
        names = [labels[p] if labels else str(p + 1) for p in self.permutation]
        sc = self.scaled()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "mode"] + [f"state_{s}" for s in names] + [f"scaled_{s}" for s in names])
        for k in range(self.states.shape[0]):
            sig = self.schedule[k] if k < len(self.schedule) else ""
            w.writerow(
                [k, sig]
                + [repr(float(x)) for x in self.states[k]]
                + [repr(float(x)) for x in sc[k]]
            )
        return buf.getvalue()


def _common_permutation(blocks: Sequence[LaplacianBlocks]) -> tuple[int, ...]:
    perm = blocks[0].permutation
    m = blocks[0].M
    for b in blocks[1:]:
        if b.permutation != perm or b.M != m:
            raise ConfigError("all topologies must share the same rooted set and ordering")
    return perm


def simulate(
    blocks: Sequence[LaplacianBlocks],
    cfg: SystemConfig,
    sigma: Sequence[int],
    xi0,
    horizon: int | None = None,
) -> Trajectory:
    """Iterate ``xi(k+1) = Lc_sigma(k) xi(k)`` and track ``zeta = P xi``.

    ``xi0`` is in block order. Each step checks ``zeta(k+1) = A zeta(k)``.
    Runs whose states exceed the divergence cap stop early with a marker.
    """
    if not blocks:
        raise ConfigError("at least one topology is required")
    perm = _common_permutation(blocks)
    K = len(sigma) if horizon is None else int(horizon)
    if len(sigma) < K:
        raise ConfigError(f"schedule covers {len(sigma)} instants, horizon is {K}")
    if any(not 0 <= s < len(blocks) for s in sigma[:K]):
        raise ConfigError("schedule refers to an unknown topology")
    xi0 = np.asarray(xi0, dtype=float)
    if xi0.shape != (cfg.N,):
        raise ConfigError(f"initial state must have {cfg.N} entries")
    systems = [build_A(b, cfg) for b in blocks]
    for i, es in enumerate(systems):
        try:
            bound = epsilon_bound(es.coupling)
        except DegenerateSpectrumError:
            continue
        if cfg.epsilon >= bound:
            warnings.warn(
                f"topology {i}: step {cfg.epsilon} is not below the bound {bound:.6g}",
                RuntimeWarning,
                stacklevel=2,
            )
    p = systems[0].P
    xs = np.empty((K + 1, cfg.N))
    zs = np.empty((K + 1, cfg.N - 1))
    xs[0], zs[0] = xi0, p @ xi0
    stop = None
    for k in range(K):
        es = systems[sigma[k]]
        xs[k + 1] = es.update @ xs[k]
        zs[k + 1] = p @ xs[k + 1]
        if not np.all(np.isfinite(xs[k + 1])) or np.max(np.abs(xs[k + 1])) > DIVERGENCE_CAP:
            stop = k + 1
            break
        gap = np.max(np.abs(zs[k + 1] - es.A @ zs[k]))
        if gap > STEP_TOL * (1 + np.max(np.abs(zs[k]))):
            raise NumericalError(f"error recursion broken at k={k}: residual {gap:.3e}")
    if stop is not None:
        xs, zs = xs[: stop + 1], zs[: stop + 1]
    return Trajectory(xs, zs, tuple(int(s) for s in sigma[:K]), cfg.delta, perm, stop)


def coordinated_state(cfg: SystemConfig, value: float) -> np.ndarray:
    """Block-order state with delta_i xi_i = value (rooted) and xi_j = value (followers)."""
    x = np.full(cfg.N, float(value))
    x[: cfg.M] = value / np.asarray(cfg.delta)
    return x


def residuals(states: np.ndarray, delta) -> np.ndarray:
    """Per-instant coordination residuals, columns (i) follower vs scaled rooted, (ii) rooted spread, (iii) follower spread."""
    d = np.asarray(delta)
    m = len(d)
    x = np.atleast_2d(states)
    sr = x[:, :m] * d
    fo = x[:, m:]
    r2 = sr.max(axis=1) - sr.min(axis=1)
    if fo.shape[1]:
        r1 = np.maximum(np.abs(fo.max(axis=1) - sr.min(axis=1)), np.abs(fo.min(axis=1) - sr.max(axis=1)))
        r3 = fo.max(axis=1) - fo.min(axis=1)
    else:
        r1 = np.zeros(len(x))
        r3 = np.zeros(len(x))
    return np.stack([r1, r2, r3], axis=1)


@dataclass(frozen=True)
class CoordinationVerdict:
    achieved: bool
    limit_rooted: float
    limit_followers: float | None
    residuals: tuple[float, float, float]
    trending_down: bool
    truncated: bool
    rate: float | None = None

    def to_dict(self) -> dict:
        return {
            "achieved": self.achieved,
            "limit_rooted": self.limit_rooted,
            "limit_followers": self.limit_followers,
            "residuals": list(self.residuals),
            "trending_down": self.trending_down,
            "truncated": self.truncated,
            "rate": self.rate,
        }


def check_coordination(
    traj: Trajectory, tol: float = 1e-6, window: int = 50, rate: float | None = None
) -> CoordinationVerdict:
    """Finite-horizon proxy for coordination over the trailing ``window`` instants."""
    n = traj.states.shape[0]
    if traj.truncated:
        window = min(window, n)
    if window < 1 or window > n:
        raise ValueError(f"window {window} outside 1..{n}")
    res = residuals(traj.states, traj.delta)
    tail = res[-window:].max(axis=0)
    prev = res[-2 * window : -window] if n >= 2 * window else res[:0]
    trending = bool(prev.size == 0 or tail.max() <= prev.max() + 1e-15)
    m = len(traj.delta)
    last = traj.states[-1]
    lr = float(np.mean(last[:m] * np.asarray(traj.delta)))
    lf = float(np.mean(last[m:])) if last.size > m else None
    achieved = bool(np.all(tail < tol) and trending and not traj.truncated)
    return CoordinationVerdict(achieved, lr, lf, tuple(float(x) for x in tail), trending, traj.truncated, rate)


def containment_limit(blocks: LaplacianBlocks, delta, xi_leaders) -> np.ndarray:
    """Follower limit ``-L3^{-1} L2 diag(delta) xi_leaders`` for non-interacting leaders."""
    if np.any(blocks.L1 != 0):
        raise HypothesisError("leaders must not receive information (L1 must be zero)")
    if blocks.N == blocks.M:
        return np.zeros(0)
    L3 = blocks.L3
    if abs(np.linalg.det(L3)) <= ZERO_TOL * (1 + np.linalg.norm(L3, 2)) ** L3.shape[0]:
        raise HypothesisError("L3 is singular: some follower is not reachable from any leader")
    return -np.linalg.solve(L3, blocks.L2 @ (np.asarray(delta, float) * np.asarray(xi_leaders, float)))


def containment_horizon(blocks: LaplacianBlocks, epsilon: float, target: float = 1e-8) -> int:
    """Steps after which the follower transient has shrunk below ``target``."""
    lam = float(np.max(np.abs(np.linalg.eigvals(np.eye(blocks.N - blocks.M) - epsilon * blocks.L3))))
    if lam >= 1:
        raise DegenerateSpectrumError("follower iteration is not contractive")
    if lam == 0:
        return 1
    return int(math.ceil(math.log(target) / math.log(lam)))


@dataclass(frozen=True, eq=False)
class FixedTopologyReport:
    spectral_radius: float
    rate: float
    phi: np.ndarray = field(repr=False)
    varphi: np.ndarray = field(repr=False)

    def limit_value(self, xi0) -> float:
        """Common value of delta_i xi_i (rooted) and xi_j (followers) in the limit."""
        return float(self.phi @ np.asarray(xi0, float) / (self.phi @ self.varphi))

    def limit(self, xi0) -> np.ndarray:
        return self.varphi * self.limit_value(xi0)

    def to_dict(self) -> dict:
        return {
            "spectral_radius": self.spectral_radius,
            "rate": self.rate,
            "phi": self.phi.tolist(),
            "varphi": self.varphi.tolist(),
        }


def fixed_topology_report(blocks: LaplacianBlocks, cfg: SystemConfig) -> FixedTopologyReport:
    """Spectral radius of A, exponential rate -ln(lambda), and the left/right unit eigenvectors."""
    es = build_A(blocks, cfg)
    lam = float(np.max(np.abs(eigenvalues(es.A)))) if cfg.N > 1 else 0.0
    varphi = np.concatenate([1.0 / np.asarray(cfg.delta), np.ones(cfg.N - cfg.M)])
    rho = np.asarray(cfg.rho)
    if np.all(rho != 0):
        p = laplacian_left_kernel(blocks.L1)
        phi = np.concatenate([p / rho, np.zeros(cfg.N - cfg.M)])
    else:
        u, s, vt = np.linalg.svd(es.coupling.T)
        if cfg.N > 1 and s[-2] <= ZERO_TOL * (1 + s[0]):
            raise HypothesisError("coupling matrix has more than one zero eigenvalue")
        phi = vt[-1]
    if abs(phi @ varphi) <= ZERO_TOL:
        raise DegenerateSpectrumError("left and right unit eigenvectors are orthogonal")
    rate = -math.log(lam) if lam > 0 else math.inf
    return FixedTopologyReport(lam, rate, phi, varphi)
