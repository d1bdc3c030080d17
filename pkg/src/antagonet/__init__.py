"""Coordination analysis for discrete-time multi-agent networks with antagonistic information."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateSpectrumError,
    HypothesisError,
    NotCertifiableError,
    NumericalError,
)
from .graph import Digraph, LaplacianBlocks, decompose, find_roots, has_spanning_tree, laplacian
from .gains import SystemConfig, epsilon_bound, search_gains, verify_gains
from .error_system import ErrorSystem, build_A
from .simulation import Trajectory, check_coordination, simulate
from .switching import certify_switching, invariant_subspaces, tdadt_audit

__all__ = [
    "ConfigError",
    "DegenerateSpectrumError",
    "Digraph",
    "ErrorSystem",
    "HypothesisError",
    "LaplacianBlocks",
    "NotCertifiableError",
    "NumericalError",
    "SystemConfig",
    "Trajectory",
    "build_A",
    "certify_switching",
    "check_coordination",
    "decompose",
    "epsilon_bound",
    "find_roots",
    "has_spanning_tree",
    "invariant_subspaces",
    "laplacian",
    "search_gains",
    "simulate",
    "tdadt_audit",
    "verify_gains",
]
