"""
Polynomial Basis Module
Multi-index sets, Legendre recurrences, design matrices and the preconditioner.
"""

from .multi_index import (
    BasisKind,
    BasisSpec,
    MultiIndex,
    MultiIndexSet,
    cardinality_formula,
    degree_schedule,
    enumerate_indices,
)
from .legendre import legendre_values_1d, legendre_derivs_1d
from .design import DesignBundle, assemble_design, compute_preconditioner

__all__ = [
    "BasisKind",
    "BasisSpec",
    "MultiIndex",
    "MultiIndexSet",
    "cardinality_formula",
    "degree_schedule",
    "enumerate_indices",
    "legendre_values_1d",
    "legendre_derivs_1d",
    "DesignBundle",
    "assemble_design",
    "compute_preconditioner",
]
