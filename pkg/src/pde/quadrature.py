"""
Gauss-Legendre Quadrature
Nodes from Newton iteration on the roots of P_n, tensorized to [-1, 1]^d.
"""

from dataclasses import dataclass
import itertools

import numpy as np

from src.errors import ConfigurationError, InternalError
from src.polybasis import legendre_derivs_1d


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,), summing to 2^d

    @property
    def n_nodes(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ values)


def gauss_legendre_1d(n: int, max_newton: int = 100) -> tuple:
    """
    n-point Gauss-Legendre nodes (ascending) and weights on [-1, 1].

    Starts from the Chebyshev-like guess cos(pi (i + 3/4) / (n + 1/2)) and
    polishes each root with Newton steps on P_n.
    """
    if n < 1:
        raise ConfigurationError(f"Quadrature needs at least one point, got {n}")
    i = np.arange(n)
    z = np.cos(np.pi * (i + 0.75) / (n + 0.5))
    for _ in range(max_newton):
        values, first, _ = legendre_derivs_1d(n, z)
        step = values[:, n] / first[:, n]
        z = z - step
        if np.max(np.abs(step)) < 1e-15:
            break
    _, first, _ = legendre_derivs_1d(n, z)
    dp = first[:, n]
    if not np.all(np.isfinite(dp)) or np.any(dp == 0.0):
        raise InternalError(f"Newton iteration for the {n}-point rule did not converge")
    weights = 2.0 / ((1.0 - z * z) * dp * dp)
    order = np.argsort(z)
    return z[order], weights[order]


def gauss_legendre_rule(points_per_dim: int, d: int) -> QuadratureRule:
    """
    Tensor-product Gauss-Legendre rule with points_per_dim nodes per axis.

    Nodes are ordered with the last axis varying fastest.
    """
    if d < 1:
        raise ConfigurationError(f"Quadrature dimension must be >= 1, got {d}")
    z, w = gauss_legendre_1d(points_per_dim)
    nodes = np.array(list(itertools.product(z, repeat=d)), dtype=np.float64)
    weights = np.array([np.prod(ws) for ws in itertools.product(w, repeat=d)])
    return QuadratureRule(nodes=nodes.reshape(-1, d), weights=weights)
