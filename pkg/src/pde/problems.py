"""
PDE Problems
Manufactured-solution test problems on [-1, 1]^2 and their residual operators.

Sign convention: the Poisson problem is Delta u = f, Allen-Cahn is
Delta u + u (u^2 - 1) = f, with Dirichlet data g = u on the boundary.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from src.polybasis import legendre_derivs_1d


PointFn = Callable[[np.ndarray], np.ndarray]


class PdeKind(str, Enum):
    POISSON = "poisson"
    ALLEN_CAHN = "allen-cahn"


@dataclass(frozen=True)
class PdeProblem:
    """
    A second-order elliptic problem with a known solution.

    Attributes:
        kind: Which residual operator applies
        exact_solution: u(x) for (n, 2) points
        laplacian: analytic Delta u(x)
        dim: Spatial dimension (the domain is [-1, 1]^dim)
    """

    kind: PdeKind
    exact_solution: PointFn
    laplacian: PointFn
    dim: int = 2

    def forcing(self, points: np.ndarray) -> np.ndarray:
        """f consistent with the exact solution under this problem's operator."""
        forcing, _ = self.apply_operator(self.exact_solution(points), self.laplacian(points))
        return forcing

    def boundary(self, points: np.ndarray) -> np.ndarray:
        """Dirichlet data g = u."""
        return self.exact_solution(points)

    def apply_operator(
        self, u: np.ndarray, lap_u: np.ndarray
    ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        Pointwise residual operator F[u] and dF/du.

        dF/du is None for the linear Poisson operator, where F depends on u
        only through its Laplacian.
        """
        if self.kind is PdeKind.POISSON:
            return lap_u, None
        return lap_u + u * (u * u - 1.0), 3.0 * u * u - 1.0

    def residual(self, points: np.ndarray, u: np.ndarray, lap_u: np.ndarray) -> np.ndarray:
        F, _ = self.apply_operator(u, lap_u)
        return F - self.forcing(points)


def _p10_parts(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    values, _, second = legendre_derivs_1d(10, z)
    return values[..., 10], second[..., 10]


def manufactured_poisson() -> PdeProblem:
    """Poisson problem with u = P_10(x) P_10(y)."""

    def solution(points: np.ndarray) -> np.ndarray:
        px, _ = _p10_parts(points[:, 0])
        py, _ = _p10_parts(points[:, 1])
        return px * py

    def laplacian(points: np.ndarray) -> np.ndarray:
        px, ddx = _p10_parts(points[:, 0])
        py, ddy = _p10_parts(points[:, 1])
        return ddx * py + px * ddy

    return PdeProblem(PdeKind.POISSON, solution, laplacian)


def manufactured_allen_cahn() -> PdeProblem:
    """Allen-Cahn problem with u = x^3 y^3 + 5 x cos(2 pi x) cos(2 pi y)."""
    two_pi = 2.0 * np.pi

    def solution(points: np.ndarray) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        return x**3 * y**3 + 5.0 * x * np.cos(two_pi * x) * np.cos(two_pi * y)

    def laplacian(points: np.ndarray) -> np.ndarray:
        x, y = points[:, 0], points[:, 1]
        cx, cy, sx = np.cos(two_pi * x), np.cos(two_pi * y), np.sin(two_pi * x)
        return (
            6.0 * x * y**3
            + 6.0 * x**3 * y
            - 40.0 * np.pi**2 * x * cx * cy
            - 20.0 * np.pi * sx * cy
        )

    return PdeProblem(PdeKind.ALLEN_CAHN, solution, laplacian)


def make_problem(kind: PdeKind) -> PdeProblem:
    if PdeKind(kind) is PdeKind.POISSON:
        return manufactured_poisson()
    return manufactured_allen_cahn()
