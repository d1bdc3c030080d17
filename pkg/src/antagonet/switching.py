"""Switching certificates for a finite family of error matrices.

Each error matrix ``A_i`` splits into the eigenvalue-1 subspace (``H_dag``) and
the subspace of eigenvalues strictly inside the unit disk (``H_ddag``). The
bound constants are

* ``rho_dag = ||A_i||`` on ``H_dag`` (1 for a semisimple unit eigenvalue);
* ``rho_ddag = sup_k ||A_i^k||_{H_ddag} / lambda^k`` with ``lambda`` the
  largest sub-unit modulus, so ``||A_i^k v|| <= rho_ddag lambda^k ||v||``;
* ``rho = max(rho_dag, rho_ddag)``.

The dwell condition ``omega >= rho^(1/N)`` uses ``rho_dag`` and the rate
condition ``rho (lambda gamma)^N <= 1`` uses ``rho_ddag``. Products over the
horizon are compared in log space.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import null_space, orth, schur

from .errors import ConfigError, NotCertifiableError, NumericalError
from .spectral import eigenvalues, pinv
from .tolerances import SUBSPACE_TOL, UNIT_TOL


@dataclass(frozen=True, eq=False)
class SubspacePair:
    A: np.ndarray = field(repr=False)
    H_dag: np.ndarray = field(repr=False)
    H_ddag: np.ndarray = field(repr=False)
    rho_dag: float
    rho_ddag: float
    lambda_sub: float
    rho_similarity: float

    @property
    def rho(self) -> float:
        return max(self.rho_dag, self.rho_ddag)

    @property
    def dim_dag(self) -> int:
        return self.H_dag.shape[1]

    @property
    def dim_ddag(self) -> int:
        return self.H_ddag.shape[1]

    def to_dict(self) -> dict:
        return {
            "dim_unit": self.dim_dag,
            "dim_contractive": self.dim_ddag,
            "rho": self.rho,
            "rho_unit": self.rho_dag,
            "rho_contractive": self.rho_ddag,
            "lambda": self.lambda_sub,
            "rho_similarity": self.rho_similarity,
            "H_unit": self.H_dag.tolist(),
            "H_contractive": self.H_ddag.tolist(),
        }


@dataclass(frozen=True)
class Constants:
    """Bare certificate constants when no matrix is at hand."""

    rho_dag: float
    rho_ddag: float
    lambda_sub: float

    @property
    def rho(self) -> float:
        return max(self.rho_dag, self.rho_ddag)


def _orthonormal_real_schur(a: np.ndarray, select) -> tuple[np.ndarray, np.ndarray, int]:
    t, z, sdim = schur(a, output="real", sort=lambda x, y: select(complex(x, y)))
    return t, z, int(sdim)


def _power_sup(c: np.ndarray, lam: float, max_steps: int = 20000) -> float:
    """sup_k ||c^k|| / lam^k, k >= 0, for a matrix whose spectral radius is lam."""
    n = c.shape[0]
    if n == 0:
        return 1.0
    if lam == 0.0:
        if np.linalg.norm(c, 2) > 1e-12:
            raise NotCertifiableError("nilpotent contractive block is not zero; no finite constant")
        return 1.0
    mods = np.sort(np.abs(np.linalg.eigvals(c)))[::-1]
    sub = mods[mods < lam * (1 - 1e-9)]
    ratio = sub[0] / lam if sub.size else 0.0
    # iterate until the subdominant part has died out to round-off
    horizon = 50 if ratio == 0 else int(min(max_steps, 50 + math.log(1e-14) / math.log(ratio)))
    x = np.eye(n)
    best = 1.0
    norms = []
    scaled = c / lam
    for _ in range(horizon):
        x = scaled @ x
        s = np.linalg.norm(x, 2)
        norms.append(s)
        best = max(best, s)
    half = len(norms) // 2
    if norms[-1] > 1.5 * max(norms[:half] or [1.0]) + 1e-9:
        raise NotCertifiableError("dominant sub-unit eigenvalue is defective; constant grows without bound")
    return float(best)


def invariant_subspaces(a, unit_tol: float = UNIT_TOL) -> SubspacePair:
    """Split ``a`` into its eigenvalue-1 and sub-unit invariant subspaces."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    n = a.shape[0]
    eig = eigenvalues(a)
    unit = np.abs(eig - 1) <= unit_tol
    rest = eig[~unit]
    if np.any(np.abs(rest) >= 1 - unit_tol):
        raise NotCertifiableError(
            "eigenvalue on or outside the unit circle other than 1: "
            f"{rest[np.abs(rest) >= 1 - unit_tol]}"
        )
    d = int(unit.sum())
    if n == 0:
        return SubspacePair(a, np.zeros((0, 0)), np.zeros((0, 0)), 1.0, 1.0, 0.0, 1.0)

    t1, z1, s1 = _orthonormal_real_schur(a, lambda z: abs(z - 1) <= unit_tol)
    t2, z2, s2 = _orthonormal_real_schur(a, lambda z: abs(z - 1) > unit_tol)
    if s1 != d or s2 != n - d:
        raise NotCertifiableError("eigenvalue cluster straddles the unit tolerance; reorder failed")
    scale = 1 + np.linalg.norm(a, 2)
    if d and np.max(np.abs(t1[:d, :d] - np.eye(d))) > 1e-6 * scale:
        raise NotCertifiableError("eigenvalue 1 is defective; the unit block is not the identity")
    h_dag = z1[:, :d]
    h_ddag = z2[:, : n - d]
    lam = float(np.abs(rest).max()) if rest.size else 0.0
    rho_dag = float(np.linalg.norm(a @ h_dag, 2)) if d else 1.0
    rho_dag = max(rho_dag, 1.0)
    rho_ddag = _power_sup(t2[: n - d, : n - d], lam)
    basis = np.hstack([h_dag, h_ddag])
    return SubspacePair(a, h_dag, h_ddag, rho_dag, rho_ddag, lam, float(np.linalg.cond(basis)))


def subspace_sum(bases: Iterable[np.ndarray], n: int, tol: float = SUBSPACE_TOL) -> np.ndarray:
    cols = [b for b in bases if b.size]
    if not cols:
        return np.zeros((n, 0))
    return orth(np.hstack(cols), rcond=tol)


def subspace_intersection(bases: Iterable[np.ndarray], n: int, tol: float = SUBSPACE_TOL) -> np.ndarray:
    """Intersection as the common null space of the complementary projectors."""
    projs = [np.eye(n) - b @ b.T for b in bases]
    if not projs:
        return np.eye(n)
    return null_space(np.vstack(projs), rcond=tol)


def outside_residual(x: np.ndarray, basis: np.ndarray) -> float:
    """Largest component of the columns of x outside span(basis)."""
    if x.size == 0:
        return 0.0
    r = x - basis @ (basis.T @ x) if basis.size else x
    return float(np.linalg.norm(r, 2))


def invariance_residual(a: np.ndarray, basis: np.ndarray) -> float:
    if basis.size == 0:
        return 0.0
    return outside_residual(a @ basis, basis)


@dataclass(frozen=True, eq=False)
class StructureCheck:
    passed: bool
    C1: np.ndarray = field(repr=False)
    C2: np.ndarray = field(repr=False)
    invariance: dict = field(default_factory=dict)
    invariance_other: dict = field(default_factory=dict)
    inclusion: dict = field(default_factory=dict)
    failure: str | None = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failure": self.failure,
            "C1": self.C1.tolist(),
            "C2": self.C2.tolist(),
            "invariance_residuals": {str(k): v for k, v in self.invariance.items()},
            "invariance_residuals_other": {str(k): v for k, v in self.invariance_other.items()},
            "inclusion_residuals": {str(k): v for k, v in self.inclusion.items()},
        }


def _check_partition(n_top: int, S1, S2) -> tuple[list[int], list[int]]:
    s1, s2 = sorted(set(S1)), sorted(set(S2))
    if set(s1) | set(s2) != set(range(n_top)):
        raise ConfigError("S1 and S2 must together cover every topology")
    if not s1 or not s2:
        raise ConfigError("S1 and S2 must both be nonempty")
    return s1, s2


def check_subspace_structure(
    pairs: Sequence[SubspacePair], S1, S2, tol: float = SUBSPACE_TOL
) -> StructureCheck:
    """Sum/intersection structure behind the switching certificate.

    ``C1`` is the sum of the unit subspaces over S1 and ``C2`` the intersection
    of the contractive subspaces over S1. Both must be invariant under every
    ``A_i`` with i in S1, and ``C1`` must lie in the contractive subspace of
    every topology in S2. Invariance under the S2 matrices is reported in
    ``invariance_other`` but does not affect the verdict.
    """
    s1, s2 = _check_partition(len(pairs), S1, S2)
    n = pairs[0].A.shape[0]
    if any(p.A.shape[0] != n for p in pairs):
        raise ConfigError("error matrices differ in size")
    c1 = subspace_sum((pairs[i].H_dag for i in s1), n, tol)
    c2 = subspace_intersection((pairs[i].H_ddag for i in s1), n, tol)
    inv, other, incl = {}, {}, {}
    failure = None
    for i in range(len(pairs)):
        a = pairs[i].A
        scale = 1 + np.linalg.norm(a, 2)
        res = max(invariance_residual(a, c1), invariance_residual(a, c2))
        (inv if i in s1 else other)[i] = res
        if i in s1 and res > tol * scale * 100 and failure is None:
            failure = f"sum/intersection subspace not invariant under topology {i}"
    for i in s2:
        res = outside_residual(c1, pairs[i].H_ddag)
        incl[i] = res
        if res > tol * 100 and failure is None:
            failure = f"C1 not contained in the contractive subspace of topology {i}"
    return StructureCheck(failure is None, c1, c2, inv, other, incl, failure)


# The follower-subsystem variant uses the same machinery on I - eps L3.
check_follower_structure = check_subspace_structure


@dataclass(frozen=True)
class TdadtSpec:
    """Minimum average dwell ``dwell[i]`` and chatter bound ``chatter[i]`` per topology."""

    dwell: tuple[int, ...]
    chatter: tuple[float, ...]
    horizon: int | None = None

    def __post_init__(self):
        dwell = tuple(int(x) for x in self.dwell)
        chatter = tuple(float(x) for x in self.chatter)
        object.__setattr__(self, "dwell", dwell)
        object.__setattr__(self, "chatter", chatter)
        if len(dwell) != len(chatter) or not dwell:
            raise ConfigError("dwell and chatter need one entry per topology")
        if any(x < 1 for x in dwell):
            raise ConfigError("dwell times must be integers >= 1")
        if any(x < 0 for x in chatter):
            raise ConfigError("chatter bounds must be >= 0")

    @property
    def n_topologies(self) -> int:
        return len(self.dwell)


@dataclass(frozen=True)
class AuditRow:
    topology: int
    activations: int
    active_instants: int
    bound: float
    passed: bool


def tdadt_audit(sigma: Sequence[int], spec: TdadtSpec) -> list[AuditRow]:
    """Count maximal runs and active instants per topology; compare with chatter + T/dwell."""
    sigma = [int(s) for s in sigma]
    if spec.horizon is not None and len(sigma) != spec.horizon:
        raise ConfigError(f"signal has {len(sigma)} instants, horizon is {spec.horizon}")
    if any(not 0 <= s < spec.n_topologies for s in sigma):
        raise ConfigError("switching signal refers to an unknown topology")
    runs = [0] * spec.n_topologies
    active = [0] * spec.n_topologies
    prev = None
    for s in sigma:
        active[s] += 1
        if s != prev:
            runs[s] += 1
        prev = s
    rows = []
    for i in range(spec.n_topologies):
        bound = spec.chatter[i] + active[i] / spec.dwell[i]
        rows.append(AuditRow(i, runs[i], active[i], bound, runs[i] <= bound + 1e-12))
    return rows


def audit_csv(rows: Sequence[AuditRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["topology", "activations", "active_instants", "bound", "pass"])
    for r in rows:
        w.writerow([r.topology, r.activations, r.active_instants, repr(r.bound), int(r.passed)])
    return buf.getvalue()


def synthesize_schedule(dwell: Sequence[int], horizon: int, order: Sequence[int] | None = None) -> list[int]:
    """Rotate through ``order`` holding topology i for exactly dwell[i] instants.

    Every activation lasts a full dwell except possibly the last, so a chatter
    bound of 1 suffices.
    """
    order = list(range(len(dwell))) if order is None else [int(i) for i in order]
    if not order or horizon < 0:
        raise ConfigError("need a nonempty rotation and a nonnegative horizon")
    out: list[int] = []
    k = 0
    while len(out) < horizon:
        i = order[k % len(order)]
        out.extend([i] * int(dwell[i]))
        k += 1
    return out[:horizon]


@dataclass(frozen=True)
class SwitchingCertificate:
    omega: tuple[float, ...]
    gamma: tuple[float, ...]
    decay: tuple[float, ...]
    S1: frozenset
    S2: frozenset

    def __post_init__(self):
        for name in ("omega", "gamma", "decay"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        object.__setattr__(self, "S1", frozenset(int(i) for i in self.S1))
        object.__setattr__(self, "S2", frozenset(int(i) for i in self.S2))
        n = len(self.omega)
        if not (len(self.gamma) == len(self.decay) == n):
            raise ConfigError("omega, gamma and decay need one entry per topology")
        if any(w <= 0 for w in self.omega):
            raise ConfigError("omega must be > 0")
        if any(g <= 1 for g in self.gamma):
            raise ConfigError("gamma must be > 1")
        if any(not 0 < d < 1 for d in self.decay):
            raise ConfigError("decay bounds must lie in (0, 1)")
        _check_partition(n, self.S1, self.S2)


def tightest_uniform_decay(omega, gamma, S1, S2, active) -> float:
    """Smallest common decay bound for which both horizon products hold."""
    s1, s2 = set(S1), set(S2)
    lw = [math.log(w) for w in omega]
    lg = [math.log(g) for g in gamma]
    total = sum(active)
    if total == 0:
        raise ConfigError("empty horizon")
    first = sum(active[i] * lw[i] for i in s1) - sum(active[i] * lg[i] for i in s2)
    second = -sum(active[i] * lg[i] for i in s1) + sum(active[i] * lw[i] for i in s2)
    return math.exp(max(first, second) / total)


@dataclass(frozen=True)
class Certification:
    certified: bool
    dwell_margins: tuple[float, ...]
    rate_margins: tuple[float, ...]
    product_margins: tuple[float, float]
    tdadt_passed: bool
    structure_passed: bool | None
    decay: float
    envelope_constant: float
    failure: str | None

    def to_dict(self) -> dict:
        return {
            "certified": self.certified,
            "failure": self.failure,
            "dwell_margins": list(self.dwell_margins),
            "rate_margins": list(self.rate_margins),
            "product_margins": list(self.product_margins),
            "tdadt_passed": self.tdadt_passed,
            "structure_passed": self.structure_passed,
            "decay": self.decay,
            "envelope_constant": self.envelope_constant,
        }


def certify_switching(
    consts: Sequence,
    cert: SwitchingCertificate,
    dwell: Sequence[int],
    audit: Sequence[AuditRow],
    chatter: Sequence[float] | None = None,
    structure: StructureCheck | None = None,
    tol: float = 1e-12,
) -> Certification:
    """Check the four switching inequalities for one audited horizon.

    Margins are in log space and must be <= tol (dwell and rate per topology,
    the two horizon products). ``decay`` is max of the per-topology bounds and
    ``envelope_constant`` is prod rho_i^chatter_i, so that
    ``||zeta(K)|| <= envelope_constant * decay^K * ||zeta(0)||``.
    """
    n = len(consts)
    if len(cert.omega) != n or len(dwell) != n or len(audit) != n:
        raise ConfigError("constants, certificate, dwell and audit must cover the same topologies")
    dwell_m, rate_m = [], []
    for i, c in enumerate(consts):
        dwell_m.append(math.log(c.rho_dag) / dwell[i] - math.log(cert.omega[i]))
        lam = c.lambda_sub
        rate_m.append(
            -math.inf if lam == 0 else math.log(lam * cert.gamma[i]) + math.log(c.rho_ddag) / dwell[i]
        )
    T = [r.active_instants for r in audit]
    lw = [math.log(w) for w in cert.omega]
    lg = [math.log(g) for g in cert.gamma]
    ld = sum(T[i] * math.log(cert.decay[i]) for i in range(n))
    p1 = sum(T[i] * lw[i] for i in cert.S1) - sum(T[i] * lg[i] for i in cert.S2) - ld
    p2 = -sum(T[i] * lg[i] for i in cert.S1) + sum(T[i] * lw[i] for i in cert.S2) - ld
    scale = tol * (1 + sum(T))
    tdadt_ok = all(r.passed for r in audit)
    failure = None
    for i, m in enumerate(dwell_m):
        if m > tol and failure is None:
            failure = f"dwell condition fails for topology {i}: omega below rho^(1/N)"
    for i, m in enumerate(rate_m):
        if m > tol and failure is None:
            failure = f"rate condition fails for topology {i}: rho (lambda gamma)^N > 1"
    if p1 > scale and failure is None:
        failure = "first horizon product exceeds the decay budget"
    if p2 > scale and failure is None:
        failure = "second horizon product exceeds the decay budget"
    if not tdadt_ok and failure is None:
        failure = "switching signal violates the average dwell bound"
    if structure is not None and not structure.passed and failure is None:
        failure = f"subspace structure fails: {structure.failure}"
    chatter = [1.0] * n if chatter is None else list(chatter)
    env = math.prod(c.rho ** chatter[i] for i, c in enumerate(consts))
    return Certification(
        certified=failure is None,
        dwell_margins=tuple(dwell_m),
        rate_margins=tuple(rate_m),
        product_margins=(p1, p2),
        tdadt_passed=tdadt_ok,
        structure_passed=None if structure is None else structure.passed,
        decay=max(cert.decay),
        envelope_constant=env,
        failure=failure,
    )


def certify_all_trees(consts: Sequence, gammas: Sequence[float], dwells: Sequence[int]) -> list[bool]:
    """Per-topology rate check ``rho (lambda gamma)^N <= 1`` when every topology has a spanning tree."""
    out = []
    for c, g, n in zip(consts, gammas, dwells):
        if g <= 1:
            raise ConfigError("gamma must be > 1")
        out.append(c.rho_ddag * (c.lambda_sub * g) ** n <= 1 + 1e-12)
    return out


def rate_products(consts: Sequence, gammas: Sequence[float], dwells: Sequence[int]) -> list[float]:
    return [c.rho_ddag * (c.lambda_sub * g) ** n for c, g, n in zip(consts, gammas, dwells)]


def follower_matrices(L3s: Sequence[np.ndarray], epsilon: float) -> list[np.ndarray]:
    """I - eps L3 for each topology (the follower-coordinate dynamics when leaders do not interact)."""
    return [np.eye(np.asarray(l).shape[0]) - epsilon * np.asarray(l, dtype=float) for l in L3s]


@dataclass(frozen=True, eq=False)
class ProjectorCheck:
    holds: bool
    theta: np.ndarray = field(repr=False)
    theta_right: np.ndarray = field(repr=False)
    projectors_agree: bool
    residual: float

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "projectors_agree": self.projectors_agree,
            "residual": self.residual,
            "theta": self.theta.tolist(),
        }


def check_range_projector(l_hat, L3, tol: float = 1e-8) -> ProjectorCheck:
    """Whether ``Theta l_hat = l_hat`` with ``Theta = L3 pinv(L3)``.

    ``l_hat`` is the leader-to-follower coupling ``L2 diag(delta)``. The
    right projector ``pinv(L3) L3`` is reported for comparison; the two differ
    when L3 is not range-symmetric.
    """
    l_hat = np.atleast_2d(np.asarray(l_hat, dtype=float))
    L3 = np.atleast_2d(np.asarray(L3, dtype=float))
    x = pinv(L3)
    theta, theta_r = L3 @ x, x @ L3
    if np.max(np.abs(theta @ theta - theta), initial=0.0) > tol:
        raise NumericalError("L3 pinv(L3) is not idempotent")
    resid = float(np.max(np.abs(theta @ l_hat - l_hat), initial=0.0))
    scale = 1 + np.max(np.abs(l_hat), initial=0.0)
    return ProjectorCheck(
        holds=resid <= tol * scale,
        theta=theta,
        theta_right=theta_r,
        projectors_agree=bool(np.allclose(theta, theta_r, atol=tol)),
        residual=resid,
    )
