"""
Synthetic Targets
"""

from enum import Enum

import numpy as np

from src.errors import ConfigurationError
from src.polybasis import legendre_values_1d


class TargetKind(str, Enum):
    LEGENDRE10 = "legendre10"
    X2SIN1Y = "x2sin1y"
    HIGHDIM_SINEPROD = "highdim-sineprod"


def synthetic_target(kind: TargetKind, points: np.ndarray) -> np.ndarray:
    """
    Evaluate a synthetic regression target at (n, d) points.

        legendre10:        P_10(x) P_10(y)
        x2sin1y:           x^2 sin(1/y), defined as 0 on y = 0
        highdim-sineprod:  5 pi^2 sin(2 pi x_0) prod_{i >= 1} sin(pi x_i)
    """
    kind = TargetKind(kind)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d = points.shape[1]

    if kind is TargetKind.HIGHDIM_SINEPROD:
        value = 5.0 * np.pi**2 * np.sin(2.0 * np.pi * points[:, 0])
        for i in range(1, d):
            value = value * np.sin(np.pi * points[:, i])
        return value

    if d != 2:
        raise ConfigurationError(f"Target {kind.value} is two-dimensional, got d={d}")
    x, y = points[:, 0], points[:, 1]
    if kind is TargetKind.LEGENDRE10:
        return legendre_values_1d(10, x)[:, 10] * legendre_values_1d(10, y)[:, 10]

    out = np.zeros(len(x))
    nonzero = y != 0.0
    out[nonzero] = x[nonzero] ** 2 * np.sin(1.0 / y[nonzero])
    return out
