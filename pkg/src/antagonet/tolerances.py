"""Numerical tolerances shared across the package.

Every routine that compares against zero or one takes an optional override;
these are the defaults.
"""

# Eigenvalue/zero detection, scaled by (1 + ||m||_2).
ZERO_TOL = 1e-9
# Residual allowed in the four Penrose identities.
PENROSE_TOL = 1e-8
# Radius of the eigenvalue-1 cluster of an error matrix.
UNIT_TOL = 1e-7
# Singular-value threshold for subspace sums, intersections and inclusions.
SUBSPACE_TOL = 1e-8
# Absolute threshold for pairing two eigenvalue multisets.
MATCH_TOL = 1e-6
# Residual of A P - P L, relative to (1 + ||L||).
PRODUCT_TOL = 1e-10


def zero_tol(scale: float, tol: float = ZERO_TOL) -> float:
    """Scale-relative zero threshold."""
    return tol * (1.0 + abs(scale))
