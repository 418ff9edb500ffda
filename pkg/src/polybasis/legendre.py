"""
Legendre Polynomials
Three-term recurrences for P_n and its first two derivatives.

All functions broadcast over z: a scalar gives a vector of length max_degree + 1,
an array of shape S gives an array of shape S + (max_degree + 1,).
"""

from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike

from src.errors import ConfigurationError


def _check_degree(max_degree: int):
    if max_degree < 0:
        raise ConfigurationError(f"max_degree must be >= 0, got {max_degree}")


def legendre_values_1d(max_degree: int, z: ArrayLike) -> np.ndarray:
    """
    Evaluate P_0(z), ..., P_max_degree(z).

    Uses (n + 1) P_{n+1} = (2n + 1) z P_n - n P_{n-1} with P_0 = 1, P_1 = z.
    Values outside [-1, 1] are valid polynomial extrapolations.
    """
    _check_degree(max_degree)
    z = np.asarray(z, dtype=np.float64)
    values = np.empty(z.shape + (max_degree + 1,), dtype=np.float64)
    values[..., 0] = 1.0
    if max_degree >= 1:
        values[..., 1] = z
    for n in range(1, max_degree):
        values[..., n + 1] = ((2 * n + 1) * z * values[..., n] - n * values[..., n - 1]) / (
            n + 1
        )
    return values


def legendre_derivs_1d(max_degree: int, z: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Evaluate P_n, P'_n and P''_n for n = 0..max_degree.

    Derivatives come from differentiating the three-term recurrence:
        P'_{n+1}  = P'_{n-1}  + (2n + 1) P_n
        P''_{n+1} = P''_{n-1} + (2n + 1) P'_n

    Returns:
        Tuple (values, first_derivs, second_derivs), each shaped like
        legendre_values_1d's output
    """
    values = legendre_values_1d(max_degree, z)
    first = np.zeros_like(values)
    second = np.zeros_like(values)
    if max_degree >= 1:
        first[..., 1] = 1.0
    for n in range(1, max_degree):
        first[..., n + 1] = first[..., n - 1] + (2 * n + 1) * values[..., n]
        second[..., n + 1] = second[..., n - 1] + (2 * n + 1) * first[..., n]
    return values, first, second
