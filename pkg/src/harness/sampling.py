"""
Point Sampling
Training points, boundary points and held-out evaluation grids on [-1, 1]^d.

Every sampler takes a seed (int, SeedSequence or Generator) and is
deterministic for a fixed seed.
"""

from enum import Enum
from typing import Optional, Union
import math

import numpy as np

from src.errors import ConfigurationError, UnsupportedOperation


Seed = Union[int, np.random.SeedSequence, np.random.Generator]

EVAL_POINTS_1D = 1024
EVAL_GRID_2D = 256
EVAL_RANDOM_POINTS = 20000


class SamplingMode(str, Enum):
    UNIFORM = "uniform-random"
    EQUISPACED = "equispaced"
    POISSON_DISK = "poisson-disk"


class BoundaryMode(str, Enum):
    EQUISPACED = "equispaced"
    RANDOM = "random"


def sample_points(
    n_points: int,
    dim: int,
    mode: SamplingMode = SamplingMode.UNIFORM,
    seed: Seed = 0,
    avoid_zero_axis: Optional[int] = None,
) -> np.ndarray:
    """
    Sample n_points points in [-1, 1]^dim.

    Args:
        n_points: Number of points N
        dim: Dimension d
        mode: uniform-random (i.i.d.), equispaced (d <= 2) or poisson-disk (d = 2)
        seed: Seed for the random modes
        avoid_zero_axis: For random modes, redraw points whose coordinate on
            this axis is exactly zero

    Returns:
        (N, d) array
    """
    if n_points < 1:
        raise ConfigurationError(f"Need at least one point, got {n_points}")
    if dim < 1:
        raise ConfigurationError(f"Dimension must be >= 1, got {dim}")
    mode = SamplingMode(mode)

    if mode is SamplingMode.EQUISPACED:
        return _equispaced(n_points, dim)

    rng = np.random.default_rng(seed)
    if mode is SamplingMode.POISSON_DISK:
        if dim != 2:
            raise UnsupportedOperation(f"Poisson-disk sampling is implemented for d=2 only, got d={dim}")
        points = _poisson_disk(n_points, rng)
    else:
        points = rng.uniform(-1.0, 1.0, size=(n_points, dim))

    if avoid_zero_axis is not None:
        zeros = points[:, avoid_zero_axis] == 0.0
        while np.any(zeros):
            points[zeros, avoid_zero_axis] = rng.uniform(-1.0, 1.0, size=int(zeros.sum()))
            zeros = points[:, avoid_zero_axis] == 0.0
    return points


def _equispaced(n_points: int, dim: int) -> np.ndarray:
    if dim == 1:
        return np.linspace(-1.0, 1.0, n_points).reshape(-1, 1)
    if dim > 2:
        raise UnsupportedOperation(f"Equispaced sampling supports d <= 2, got d={dim}")
    side = math.isqrt(n_points - 1) + 1  # ceil(sqrt(N))
    axis = np.linspace(-1.0, 1.0, side) if side > 1 else np.zeros(1)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    return grid[:n_points]


def _poisson_disk(n_points: int, rng: np.random.Generator) -> np.ndarray:
    """
    Dart throwing with a background grid on [-1, 1]^2.

    The exclusion radius 0.7 / sqrt(N) keeps the packing well below jamming.
    If the dart budget runs out the set is topped up with uniform points.
    """
    radius = 0.7 / math.sqrt(n_points)
    cell = radius / math.sqrt(2.0)
    cells = int(math.ceil(2.0 / cell))
    grid = -np.ones((cells, cells), dtype=np.int64)
    points = np.empty((n_points, 2))
    count = 0
    budget = 30 * n_points
    r2 = radius * radius

    for _ in range(budget):
        if count == n_points:
            break
        candidate = rng.uniform(-1.0, 1.0, size=2)
        ci = min(int((candidate[0] + 1.0) / cell), cells - 1)
        cj = min(int((candidate[1] + 1.0) / cell), cells - 1)
        blocked = False
        for i in range(max(ci - 2, 0), min(ci + 3, cells)):
            for j in range(max(cj - 2, 0), min(cj + 3, cells)):
                k = grid[i, j]
                if k >= 0 and np.sum((points[k] - candidate) ** 2) < r2:
                    blocked = True
                    break
            if blocked:
                break
        if not blocked:
            points[count] = candidate
            grid[ci, cj] = count
            count += 1

    if count < n_points:
        points[count:] = rng.uniform(-1.0, 1.0, size=(n_points - count, 2))
    return points


def boundary_points(
    per_edge: int = 100,
    mode: BoundaryMode = BoundaryMode.EQUISPACED,
    seed: Seed = 0,
) -> np.ndarray:
    """
    Points on the boundary of [-1, 1]^2, per_edge on each of the four edges.

    Equispaced placement walks the boundary counter-clockwise so every corner
    appears exactly once.
    """
    if per_edge < 1:
        raise ConfigurationError(f"Need at least one boundary point per edge, got {per_edge}")
    mode = BoundaryMode(mode)
    if mode is BoundaryMode.EQUISPACED:
        t = np.linspace(-1.0, 1.0, per_edge + 1)[:-1]
    else:
        t = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(4, per_edge))
    tb, tr, tt, tl = (t, t, t, t) if t.ndim == 1 else tuple(t)
    one = np.ones(per_edge)
    return np.concatenate(
        [
            np.column_stack([tb, -one]),
            np.column_stack([one, tr]),
            np.column_stack([-tt, one]),
            np.column_stack([-one, -tl]),
        ]
    )


def evaluation_grid(dim: int, seed: Seed = 0) -> np.ndarray:
    """
    Held-out evaluation points: 1024 equispaced in 1-D, a 256 x 256 grid in
    2-D and 20000 seeded uniform points otherwise.
    """
    if dim == 1:
        return np.linspace(-1.0, 1.0, EVAL_POINTS_1D).reshape(-1, 1)
    if dim == 2:
        axis = np.linspace(-1.0, 1.0, EVAL_GRID_2D)
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel()])
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(EVAL_RANDOM_POINTS, dim))
