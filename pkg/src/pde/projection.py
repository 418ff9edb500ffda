"""
L2 Projection
Quadrature-weighted least-squares fit onto a Legendre basis, the classical
baseline against which the trained models are compared.
"""

from dataclasses import dataclass
from typing import Callable, Optional
import logging

import numpy as np

from src.harness.metrics import relative_l2_error
from src.harness.sampling import evaluation_grid
from src.polybasis import MultiIndexSet, assemble_design, compute_preconditioner
from .quadrature import QuadratureRule


logger = logging.getLogger("pde.projection")


@dataclass
class ProjectionResult:
    coefficients: np.ndarray
    relative_error: float
    rank: int
    condition_number: float
    rank_deficient: bool


def l2_projection(
    target: Callable[[np.ndarray], np.ndarray],
    basis: MultiIndexSet,
    rule: QuadratureRule,
    preconditioned: bool = True,
    test_points: Optional[np.ndarray] = None,
) -> ProjectionResult:
    """
    Project target onto span(basis) in the quadrature-weighted L2 sense.

    Solves min_b || W^(1/2) (Phi b - y) || with W the quadrature weights,
    additionally row-scaled by the design preconditioner when requested.
    The system is solved as least squares rather than through exact
    orthogonality so that under-resolved rules behave as they would in practice.

    Args:
        target: Maps (n, d) points to (n,) values
        basis: Basis to project onto
        rule: Quadrature rule on [-1, 1]^d
        preconditioned: Apply the design preconditioner to the rows
        test_points: Where to measure the relative error (defaults to the
            standard evaluation grid for the basis dimension)

    Returns:
        ProjectionResult with coefficients, test error and conditioning

    Raises:
        DataError: the target is identically zero on the test points
    """
    bundle = assemble_design(basis, rule.nodes)
    values = np.asarray(target(rule.nodes), dtype=np.float64)
    row_scale = np.sqrt(rule.weights)
    if preconditioned:
        row_scale = row_scale * compute_preconditioner(bundle, basis).precond
    A = bundle.phi * row_scale[:, None]
    rhs = values * row_scale

    coefficients, _, rank, singular = np.linalg.lstsq(A, rhs, rcond=None)
    rank = int(rank)
    rank_deficient = rank < basis.cardinality
    condition = float(singular[0] / singular[-1]) if singular.size and singular[-1] > 0 else np.inf
    if rank_deficient:
        logger.warning(
            f"L2 projection system is rank deficient: rank {rank} < {basis.cardinality} "
            f"basis functions ({rule.n_nodes} quadrature nodes); condition {condition:.3e}"
        )

    if test_points is None:
        test_points = evaluation_grid(basis.dim)
    truth = np.asarray(target(test_points), dtype=np.float64)
    pred = assemble_design(basis, test_points).phi @ coefficients
    error = relative_l2_error(pred, truth)
    logger.info(
        f"L2 projection onto {basis.cardinality} terms with {rule.n_nodes} nodes: "
        f"relative error {error:.3e}"
    )
    return ProjectionResult(coefficients, error, rank, condition, rank_deficient)
