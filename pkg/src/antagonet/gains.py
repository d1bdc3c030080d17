"""Weighted-gain verification and search, step-size bound, feasible-region sampling.

The gained rooted block is ``G = diag(rho) @ L1 @ diag(delta)``. Coordination
needs G to have a simple zero eigenvalue with every other eigenvalue in the
open right half plane. Two independent routes decide this:

* directly from the eigenvalues of G;
* from the char-poly coefficients ``h_r = sum_S prod_{i in S} rho_i delta_i det L1[S, S]``
  fed to a Hurwitz test (``det(xI + G) = x (x^(M-1) + h_1 x^(M-2) + ... + h_(M-1))``).
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateSpectrumError, HypothesisError, NumericalError
from .graph import Digraph, has_spanning_tree
from .spectral import RouthVerdict, eigenvalues, principal_minors, routh_hurwitz
from .tolerances import ZERO_TOL, zero_tol


@dataclass(frozen=True)
class SystemConfig:
    """Scaling ``delta`` and gains ``rho`` of the M rooted agents, step ``epsilon``, N agents."""

    delta: tuple[float, ...]
    rho: tuple[float, ...]
    epsilon: float
    n_agents: int

    def __post_init__(self):
        delta = tuple(float(x) for x in self.delta)
        rho = tuple(float(x) for x in self.rho)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "n_agents", int(self.n_agents))
        if not delta:
            raise ConfigError("at least one rooted agent is required")
        if len(rho) != len(delta):
            raise ConfigError(f"rho has {len(rho)} entries, delta has {len(delta)}")
        if not all(np.isfinite(delta + rho)):
            raise ConfigError("delta and rho must be finite")
        if any(d == 0 for d in delta):
            raise ConfigError("scaling parameters delta_i must be nonzero")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ConfigError("epsilon must be a finite nonnegative number")
        if self.n_agents < len(delta):
            raise ConfigError(f"n_agents={self.n_agents} smaller than rooted count {len(delta)}")

    @property
    def M(self) -> int:
        return len(self.delta)

    @property
    def N(self) -> int:
        return self.n_agents

    def with_epsilon(self, epsilon: float) -> "SystemConfig":
        return SystemConfig(self.delta, self.rho, epsilon, self.n_agents)


def gained_block(L1, delta, rho) -> np.ndarray:
    L1 = np.asarray(L1, dtype=float)
    return np.asarray(rho, dtype=float)[:, None] * L1 * np.asarray(delta, dtype=float)[None, :]


def weighted_minor_sums(L1, weights) -> list:
    """h_1..h_M with ``h_r = sum_{|S|=r} prod_S weights * det L1[S, S]``.

    Object (int/Fraction) inputs are evaluated exactly.
    """
    L1 = np.asarray(L1)
    w = list(weights)
    exact = L1.dtype == object
    out = []
    for r in range(1, L1.shape[0] + 1):
        total = 0 if exact else 0.0
        for s, det in principal_minors(L1, r).items():
            p = 1
            for i in s:
                p = p * w[i]
            total += p * det
        out.append(total)
    return out


def mismatched(delta, rho) -> tuple[int, ...]:
    return tuple(i for i, (d, r) in enumerate(zip(delta, rho)) if np.sign(d) != np.sign(r))


def _require_tree(L1: np.ndarray) -> None:
    if not has_spanning_tree(Digraph.from_laplacian(L1)):
        raise HypothesisError("rooted block has no directed spanning tree")


@dataclass(frozen=True)
class GainVerdict:
    simple_zero: bool
    rhp_rest: bool
    mismatched_pairs: tuple[int, ...]
    routh: RouthVerdict | None
    eigenvalues: tuple[complex, ...]
    borderline: bool = False

    @property
    def sign_matched(self) -> bool:
        return not self.mismatched_pairs

    @property
    def passed(self) -> bool:
        return self.simple_zero and self.rhp_rest

    def describe(self) -> str:
        if self.passed:
            return "gain condition holds: simple zero eigenvalue, the rest in the open right half plane"
        if not self.simple_zero:
            return "gain condition violated: zero eigenvalue of the gained rooted block is not simple"
        return "gain condition violated: a nonzero eigenvalue of the gained rooted block has nonpositive real part"

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "simple_zero": self.simple_zero,
            "rhp_rest": self.rhp_rest,
            "mismatched_pairs": list(self.mismatched_pairs),
            "routh": self.routh.to_dict() if self.routh else None,
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "borderline": self.borderline,
            "message": self.describe(),
        }


def _direct_route(g: np.ndarray, tol: float) -> tuple[bool, bool, float]:
    eig = eigenvalues(g)
    scale = np.linalg.norm(g, 2)
    t = zero_tol(scale, tol)
    k = int(np.argmin(np.abs(eig)))
    rest = np.delete(eig, k)
    simple = abs(eig[k]) <= t and not np.any(np.abs(rest) <= t)
    margin = float(rest.real.min()) if rest.size else np.inf
    return bool(simple), bool(margin > t), margin / (1.0 + scale)


def verify_gains(L1, cfg: SystemConfig, tol: float = ZERO_TOL) -> GainVerdict:
    """Decide the gain condition for the rooted block ``L1`` both ways and cross-check."""
    L1 = np.asarray(L1, dtype=float)
    if L1.shape != (cfg.M, cfg.M):
        raise ConfigError(f"L1 is {L1.shape}, config has M={cfg.M}")
    _require_tree(L1)
    g = gained_block(L1, cfg.delta, cfg.rho)
    bad = mismatched(cfg.delta, cfg.rho)
    eig = tuple(complex(z) for z in eigenvalues(g))
    if cfg.M == 1:
        return GainVerdict(True, True, bad, None, eig)

    simple, rhp, margin = _direct_route(g, tol)
    w = np.asarray(cfg.rho) * np.asarray(cfg.delta)
    h = weighted_minor_sums(L1, w)[:-1]
    routh = routh_hurwitz(h, tol=tol)
    direct_ok = simple and rhp
    if direct_ok != routh.stable:
        # a double zero splits into a ~sqrt(eps) pair; near the boundary the
        # minor-based test is the better conditioned of the two
        if simple and abs(margin) > 1e-6:
            raise NumericalError(
                f"eigenvalue route ({direct_ok}) and minor route ({routh.stable}) disagree"
            )
        last = routh.coefficients[-1]
        simple = abs(last) > zero_tol(max(abs(c) for c in routh.coefficients), tol)
        return GainVerdict(simple, routh.stable, bad, routh, eig, borderline=True)
    return GainVerdict(simple, rhp, bad, routh, eig)


class Strategy(enum.Enum):
    SIGN_MATCH = "sign_match"
    REGION_SEARCH = "region_search"


COARSE_MAGNITUDES = np.logspace(-2, 1, 17)


def _margin(L1: np.ndarray, delta, rho, tol: float = ZERO_TOL) -> float:
    """Positive iff the gain condition holds; larger is more robust."""
    simple, _, margin = _direct_route(gained_block(L1, delta, rho), tol)
    return margin if simple else -np.inf


def search_gains(L1, delta, strategy=Strategy.SIGN_MATCH, free=None, base=None):
    """Find gains satisfying the gain condition, or None.

    SIGN_MATCH returns sgn(delta). REGION_SEARCH gives each index in ``free``
    the opposite sign of its delta, keeps the other entries at ``base``
    (default sgn(delta)), scans 17 log-spaced magnitudes in [0.01, 10] per free
    coordinate and refines twice around the best hit.
    """
    L1 = np.asarray(L1, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(delta == 0):
        raise ConfigError("scaling parameters delta_i must be nonzero")
    _require_tree(L1)
    strategy = Strategy(strategy)
    start = np.sign(delta) if base is None else np.asarray(base, dtype=float).copy()
    if strategy is Strategy.SIGN_MATCH:
        return np.sign(delta)
    free = sorted(set(int(i) for i in (free or [])))
    if not free:
        raise ValueError("REGION_SEARCH needs at least one free coordinate")
    signs = -np.sign(delta[free])

    def score(logs):
        rho = start.copy()
        rho[free] = signs * 10.0 ** np.asarray(logs)
        return _margin(L1, delta, rho), rho

    best = max(
        (score(p) for p in itertools.product(np.log10(COARSE_MAGNITUDES), repeat=len(free))),
        key=lambda t: t[0],
    )
    if not best[0] > 0:
        return None
    step = 3.0 / 16
    for _ in range(2):
        centre = np.log10(np.abs(best[1][free]))
        offsets = np.linspace(-step, step, 5)
        for off in itertools.product(offsets, repeat=len(free)):
            cand = score(np.clip(centre + np.asarray(off), -2.0, 1.0))
            if cand[0] > best[0]:
                best = cand
        step /= 4
    cfg = SystemConfig(tuple(delta), tuple(best[1]), 0.0, len(delta))
    return best[1] if verify_gains(L1, cfg).passed else None


def pair_feasibility(L1, delta, base=None) -> dict[int, bool]:
    """For each rooted index, whether flipping only that gain's sign can work."""
    return {
        i: search_gains(L1, delta, Strategy.REGION_SEARCH, free=[i], base=base) is not None
        for i in range(len(delta))
    }


def epsilon_bound(mmat, zero_count: int = 1, tol: float = ZERO_TOL) -> float:
    """Largest step size with ``I - eps*mmat`` contractive off its unit eigenvalues.

    ``min over nonzero eigenvalues mu of 2 Re(mu) / |mu|^2``. Exactly
    ``zero_count`` eigenvalues must vanish and the rest must have positive
    real part.
    """
    m = np.asarray(mmat, dtype=float)
    eig = eigenvalues(m)
    t = zero_tol(np.linalg.norm(m, 2) if m.size else 0.0, tol)
    zeros = np.abs(eig) <= t
    if int(zeros.sum()) != zero_count:
        raise DegenerateSpectrumError(
            f"expected {zero_count} zero eigenvalue(s), found {int(zeros.sum())}"
        )
    rest = eig[~zeros]
    if np.any(rest.real <= t):
        raise DegenerateSpectrumError("a nonzero eigenvalue has nonpositive real part")
    if rest.size == 0:
        return float("inf")
    return float(np.min(2 * rest.real / np.abs(rest) ** 2))


@dataclass(frozen=True)
class RegionSample:
    free_indices: tuple[int, ...]
    points: np.ndarray = field(repr=False)
    feasible: np.ndarray = field(repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"rho_{i + 1}" for i in self.free_indices] + ["feasible"])
        for p, f in zip(self.points, self.feasible):
            w.writerow([repr(float(x)) for x in p] + [int(f)])
        return buf.getvalue()


def hurwitz_feasible(L1, delta, rhos: np.ndarray, tol: float = ZERO_TOL) -> np.ndarray:
    """Vectorised minor route for a batch of gain vectors (rows of ``rhos``)."""
    L1 = np.asarray(L1, dtype=float)
    delta = np.asarray(delta, dtype=float)
    w = np.atleast_2d(rhos) * delta[None, :]
    m = L1.shape[0]
    if m == 1:
        return np.ones(len(w), dtype=bool)
    hs = []
    for r in range(1, m):
        acc = np.zeros(len(w))
        for s in itertools.combinations(range(m), r):
            d = np.linalg.det(L1[np.ix_(s, s)])
            acc += d * np.prod(w[:, list(s)], axis=1)
        hs.append(acc)
    h = np.stack(hs, axis=1)
    n = m - 1
    a = np.concatenate([np.ones((len(w), 1)), h], axis=1)
    hm = np.zeros((len(w), n, n))
    for i in range(n):
        for j in range(n):
            k = 2 * j - i + 1
            if 0 <= k <= n:
                hm[:, i, j] = a[:, k]
    ok = np.all(h > tol * (1 + np.max(np.abs(h), axis=1, keepdims=True)), axis=1)
    for r in range(1, n + 1, 2):
        sub = hm[:, :r, :r]
        bound = np.prod(np.linalg.norm(sub, axis=2), axis=1)
        ok &= np.linalg.det(sub) > tol * bound
    matched = np.all(np.sign(w) > 0, axis=1)
    return ok | matched


def sample_feasible_region(L1, delta, free_indices, box, resolution: int = 21, base=None) -> RegionSample:
    """Grid the free gains over ``box`` with ``resolution`` points per axis.

    Non-free gains stay at ``base`` (default sgn(delta)).
    """
    L1 = np.asarray(L1, dtype=float)
    delta = np.asarray(delta, dtype=float)
    free = tuple(int(i) for i in free_indices)
    if not 1 <= len(free) <= 3:
        raise ValueError("between one and three free coordinates are supported")
    if len(box) != len(free):
        raise ValueError("one (low, high) range per free coordinate")
    if any(not hi > lo for lo, hi in box) or resolution < 1:
        raise ValueError("empty box")
    _require_tree(L1)
    axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(free))
    rhos = np.tile(np.sign(delta) if base is None else np.asarray(base, float), (len(pts), 1))
    rhos[:, list(free)] = pts
    return RegionSample(free, pts, hurwitz_feasible(L1, delta, rhos))
