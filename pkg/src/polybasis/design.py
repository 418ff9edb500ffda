"""
Design Matrices
Precomputes polynomial basis evaluations (values, first partials, Laplacians)
at a fixed point set, and the diagonal preconditioner built from them.

The basis functions never change during training, only their coefficients do,
so every matrix here is assembled once per point set.
"""

from dataclasses import dataclass, replace
from typing import List, Optional
import logging

import numpy as np

from src.errors import ConfigurationError, InternalError
from .legendre import legendre_derivs_1d
from .multi_index import MultiIndexSet


logger = logging.getLogger("polybasis.design")


@dataclass
class DesignBundle:
    """
    Basis evaluations at n points for an m-term basis.

    Attributes:
        phi: (n, m) basis values
        dphi: (d, n, m) first partials, or None when not requested
        lap_phi: (n, m) Laplacians, or None when not requested
        precond: (n,) diagonal preconditioner K(x_i), or None until computed
    """

    phi: np.ndarray
    dphi: Optional[np.ndarray] = None
    lap_phi: Optional[np.ndarray] = None
    precond: Optional[np.ndarray] = None

    @property
    def n_points(self) -> int:
        return int(self.phi.shape[0])

    @property
    def n_basis(self) -> int:
        return int(self.phi.shape[1])

    @classmethod
    def empty(cls, n_points: int, dim: int, with_laplacian: bool = False) -> "DesignBundle":
        """Bundle for a model without a polynomial layer (m = 0)."""
        return cls(
            phi=np.zeros((n_points, 0)),
            dphi=np.zeros((dim, n_points, 0)),
            lap_phi=np.zeros((n_points, 0)) if with_laplacian else None,
        )

    def row_weights(self, preconditioned: bool) -> np.ndarray:
        """
        K_i when preconditioning is on, ones otherwise.

        Raises:
            InternalError: preconditioning requested but never computed
        """
        if not preconditioned:
            return np.ones(self.n_points)
        if self.precond is None:
            raise InternalError("Preconditioned loss on a design whose preconditioner was never computed")
        return self.precond


def _product_of_others(factors: List[np.ndarray]) -> List[np.ndarray]:
    """For each j, the elementwise product of every factor except factors[j]."""
    d = len(factors)
    prefix = [np.ones_like(factors[0])]
    for j in range(d - 1):
        prefix.append(prefix[-1] * factors[j])
    suffix = np.ones_like(factors[0])
    others: List[np.ndarray] = [None] * d
    for j in range(d - 1, -1, -1):
        others[j] = prefix[j] * suffix
        suffix = suffix * factors[j]
    return others


def assemble_design(
    basis: MultiIndexSet,
    points: np.ndarray,
    with_laplacian: bool = False,
    with_gradient: bool = False,
) -> DesignBundle:
    """
    Evaluate a tensor-Legendre basis at a point set.

    phi[i, k] = prod_j P_{k_j}(x_ij); the Laplacian column sums, over j, the
    second derivative in dimension j times the values in all other dimensions.
    Inactive indices are assembled too; masking happens in the model.

    Args:
        basis: Index set to evaluate
        points: (n, d) array
        with_laplacian: Also assemble lap_phi
        with_gradient: Also assemble the per-dimension first partials

    Returns:
        DesignBundle with precond left unset
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if basis.cardinality == 0:
        raise ConfigurationError("Cannot assemble a design for an empty basis")
    if points.shape[1] != basis.dim:
        raise ConfigurationError(
            f"Points have dimension {points.shape[1]} but basis has dimension {basis.dim}"
        )
    outside = np.abs(points) > 1.0
    if outside.any():
        logger.warning(
            f"{int(outside.any(axis=1).sum())} of {len(points)} points lie outside [-1,1]^{basis.dim}; "
            "Legendre values are extrapolated"
        )

    values, firsts, seconds = [], [], []
    for j in range(basis.dim):
        column = basis.indices[:, j]
        v, d1, d2 = legendre_derivs_1d(int(column.max()), points[:, j])
        values.append(v[:, column])
        if with_gradient:
            firsts.append(d1[:, column])
        if with_laplacian:
            seconds.append(d2[:, column])

    phi = values[0].copy()
    for j in range(1, basis.dim):
        phi *= values[j]

    dphi = None
    lap_phi = None
    if with_gradient or with_laplacian:
        others = _product_of_others(values)
        if with_gradient:
            dphi = np.stack([firsts[j] * others[j] for j in range(basis.dim)])
        if with_laplacian:
            lap_phi = np.zeros_like(phi)
            for j in range(basis.dim):
                lap_phi += seconds[j] * others[j]

    return DesignBundle(phi=phi, dphi=dphi, lap_phi=lap_phi)


def compute_preconditioner(bundle: DesignBundle, basis: MultiIndexSet) -> DesignBundle:
    """
    Fill the diagonal preconditioner K(x_i) = sqrt(m / sum_k phi_k(x_i)^2).

    The sum and m run over active basis functions only.

    Returns:
        A copy of the bundle with precond set
    """
    if bundle.n_basis != basis.cardinality:
        raise ConfigurationError(
            f"Design has {bundle.n_basis} columns but basis has {basis.cardinality} indices"
        )
    active_phi = bundle.phi[:, basis.active]
    m = active_phi.shape[1]
    energy = np.einsum("ik,ik->i", active_phi, active_phi)
    if m == 0 or np.any(energy <= 0.0):
        raise InternalError("Preconditioner undefined: a row has zero basis energy")
    return replace(bundle, precond=np.sqrt(m / energy))
