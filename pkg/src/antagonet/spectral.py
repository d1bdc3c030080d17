"""Small dense numerics: eigenvalues, minors, Hurwitz tests, Gershgorin disks, pseudo-inverses.

Sign convention: eigenvalues are always those of the matrix passed in. The
coordination conditions are stated for the positive Laplacian-like matrices
(eigenvalues in the open right half plane), never their negatives.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graph import canonical_sort
from .tolerances import PENROSE_TOL, ZERO_TOL, zero_tol


def _square(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def eigenvalues(m) -> np.ndarray:
    """All eigenvalues with multiplicity, sorted by (real, imag)."""
    m = _square(np.asarray(m, dtype=float))
    if m.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    return canonical_sort(np.linalg.eigvals(m))


def rank(m) -> int:
    """Numerical rank; threshold dim * eps * largest singular value."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0
    return int(np.linalg.matrix_rank(m))


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: tuple[complex, ...]
    rank: int
    zero_multiplicity: int
    dominant_subunit_modulus: float | None

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "rank": self.rank,
            "zero_multiplicity": self.zero_multiplicity,
            "dominant_subunit_modulus": self.dominant_subunit_modulus,
        }


def spectral_report(m, tol: float = ZERO_TOL) -> SpectralReport:
    m = _square(np.asarray(m, dtype=float))
    eig = eigenvalues(m)
    scale = np.linalg.norm(m, 2) if m.size else 0.0
    t = zero_tol(scale, tol)
    mod = np.abs(eig)
    sub = mod[mod < 1 - tol]
    return SpectralReport(
        eigenvalues=tuple(complex(z) for z in eig),
        rank=rank(m),
        zero_multiplicity=int(np.sum(mod <= t)),
        dominant_subunit_modulus=float(sub.max()) if sub.size else None,
    )


def exact_det(m) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination (rational inputs)."""
    a = [[Fraction(x) for x in row] for row in np.asarray(m, dtype=object)]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return det


def _det(sub: np.ndarray):
    if sub.dtype == object:
        return exact_det(sub)
    return float(np.linalg.det(sub)) if sub.size else 1.0


def principal_minors(m, r: int) -> dict[tuple[int, ...], float]:
    """Every r-th order principal minor, keyed by the (sorted) index subset."""
    m = _square(m)
    n = m.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"order r={r} outside 1..{n}")
    return {s: _det(m[np.ix_(s, s)]) for s in itertools.combinations(range(n), r)}


def principal_minor_sum(m, r: int):
    """Sum of all r-th order principal minors (e_r of the eigenvalues).

    Object arrays of ints/Fractions are summed exactly.
    """
    vals = principal_minors(m, r).values()
    if np.asarray(m).dtype == object:
        return sum(vals, Fraction(0))
    return float(np.sum(list(vals)))


def elementary_symmetric(values, r: int) -> complex:
    """e_r of a list, via the coefficients of prod (x + v)."""
    coeffs = np.poly(-np.asarray(values, dtype=complex)) if len(values) else np.ones(1)
    return complex(coeffs[r])


def hurwitz_matrix(coeffs) -> np.ndarray:
    """Hurwitz matrix of x^n + h1 x^(n-1) + ... + hn.

    Entry (i, j), 0-based, is a[2j - i + 1] with a = (1, h1, ..., hn) and
    zero outside that range.
    """
    a = [1.0] + [float(c) for c in coeffs]
    n = len(a) - 1
    h = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            k = 2 * j - i + 1
            if 0 <= k <= n:
                h[i, j] = a[k]
    return h


@dataclass(frozen=True)
class RouthVerdict:
    coefficients: tuple[float, ...]
    hurwitz_dets: tuple[float, ...]
    stable: bool
    families_agree: bool
    family: str = "odd"

    def to_dict(self) -> dict:
        return {
            "coefficients": list(self.coefficients),
            "hurwitz_dets": list(self.hurwitz_dets),
            "stable": self.stable,
            "families_agree": self.families_agree,
            "family": self.family,
        }


def _hadamard(h: np.ndarray) -> float:
    return float(np.prod(np.linalg.norm(h, axis=1))) if h.size else 1.0


def routh_hurwitz(coeffs, family: str = "odd", tol: float = ZERO_TOL) -> RouthVerdict:
    """Lienard-Chipart test for x^n + h1 x^(n-1) + ... + hn.

    Stable iff every h_r > 0 and every leading Hurwitz minor of the chosen
    parity is > 0. Both parities are evaluated; they must agree.
    """
    if family not in ("odd", "even"):
        raise ValueError("family must be 'odd' or 'even'")
    c = np.asarray(coeffs, dtype=float).ravel()
    if c.size == 0:
        raise ValueError("empty coefficient list")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite")
    h = hurwitz_matrix(c)
    n = c.size
    dets, positive = [], []
    for r in range(1, n + 1):
        sub = h[:r, :r]
        d = float(np.linalg.det(sub))
        dets.append(d)
        positive.append(d > tol * _hadamard(sub))
    coeff_ok = bool(np.all(c > zero_tol(np.max(np.abs(c)), tol)))
    odd = coeff_ok and all(positive[r - 1] for r in range(1, n + 1, 2))
    even = coeff_ok and all(positive[r - 1] for r in range(2, n + 1, 2))
    agree = odd == even
    if not agree:
        warnings.warn(
            "odd and even Hurwitz families disagree; the polynomial is badly conditioned",
            RuntimeWarning,
            stacklevel=2,
        )
    return RouthVerdict(
        coefficients=tuple(float(x) for x in c),
        hurwitz_dets=tuple(dets),
        stable=odd if family == "odd" else even,
        families_agree=agree,
        family=family,
    )


def gershgorin(m) -> list[tuple[complex, float]]:
    """Row disks (m_ii, sum_{j != i} |m_ij|)."""
    m = _square(np.asarray(m))
    off = np.abs(m).sum(axis=1) - np.abs(np.diag(m))
    return [(complex(m[i, i]), float(off[i])) for i in range(m.shape[0])]


def in_gershgorin(z: complex, disks, slack: float = 1e-9) -> bool:
    return any(abs(z - c) <= r + slack * (1 + abs(c) + r) for c, r in disks)


def pinv(m) -> np.ndarray:
    """Moore-Penrose inverse (SVD based)."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return np.zeros((m.shape[1], m.shape[0]))
    return np.linalg.pinv(m)


def penrose_residuals(m, x) -> tuple[float, float, float, float]:
    """Residuals of AXA=A, XAX=X, (AX)^T=AX, (XA)^T=XA.

    Each is the max-abs error divided by 1 + max|target|, so huge or tiny
    inputs are judged on relative accuracy.
    """
    a = np.atleast_2d(np.asarray(m, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if a.size == 0:
        return (0.0, 0.0, 0.0, 0.0)
    ax, xa = a @ x, x @ a
    def rel(err, target):
        return float(np.max(np.abs(err)) / (1.0 + np.max(np.abs(target))))

    return (
        rel(ax @ a - a, a),
        rel(xa @ x - x, x),
        rel(ax.T - ax, ax),
        rel(xa.T - xa, xa),
    )


def is_penrose_inverse(m, x, tol: float = PENROSE_TOL) -> bool:
    return max(penrose_residuals(m, x)) <= tol
