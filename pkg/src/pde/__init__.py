"""
PDE Module
Manufactured Poisson and Allen-Cahn problems, Gauss-Legendre quadrature and
the L2-projection baseline.
"""

from .problems import (
    PdeKind,
    PdeProblem,
    make_problem,
    manufactured_allen_cahn,
    manufactured_poisson,
)
from .quadrature import QuadratureRule, gauss_legendre_1d, gauss_legendre_rule
from .projection import ProjectionResult, l2_projection

__all__ = [
    "PdeKind",
    "PdeProblem",
    "make_problem",
    "manufactured_allen_cahn",
    "manufactured_poisson",
    "QuadratureRule",
    "gauss_legendre_1d",
    "gauss_legendre_rule",
    "ProjectionResult",
    "l2_projection",
]
