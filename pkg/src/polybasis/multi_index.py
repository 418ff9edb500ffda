"""
Multi-Index Sets
Enumerates the d-dimensional polynomial index sets (tensor-product, total-degree,
hyperbolic-cross) that define a polynomial layer, and the degree schedule that
sizes them from the number of training points.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Tuple
import math

import numpy as np

from src.errors import ConfigurationError


MultiIndex = Tuple[int, ...]


class BasisKind(str, Enum):
    TENSOR_PRODUCT = "tensor-product"
    TOTAL_DEGREE = "total-degree"
    HYPERBOLIC_CROSS = "hyperbolic-cross"


@dataclass(frozen=True)
class BasisSpec:
    kind: BasisKind
    dim: int
    degree: int

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if self.dim < 1:
            raise ConfigurationError(f"Basis dimension must be >= 1, got {self.dim}")
        if self.degree < 0:
            raise ConfigurationError(f"Basis degree must be >= 0, got {self.degree}")


@dataclass
class MultiIndexSet:
    """
    Ordered polynomial basis with a truncation mask.

    Attributes:
        spec: The kind/dimension/degree that generated the set
        indices: Integer array of shape (m, d), graded-lexicographic order
        active: Boolean mask of length m; False marks a truncated basis function
    """

    spec: BasisSpec
    indices: np.ndarray
    active: np.ndarray = field(default=None)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, self.spec.dim)
        if self.active is None:
            self.active = np.ones(len(self.indices), dtype=bool)
        self.active = np.asarray(self.active, dtype=bool)
        if self.active.shape != (len(self.indices),):
            raise ConfigurationError(
                f"Mask length {self.active.shape} does not match {len(self.indices)} indices"
            )

    @property
    def cardinality(self) -> int:
        return int(self.indices.shape[0])

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def __len__(self) -> int:
        return self.cardinality

    def as_tuples(self) -> List[MultiIndex]:
        return [tuple(int(k) for k in row) for row in self.indices]

    def active_indices(self) -> List[MultiIndex]:
        return [tuple(int(k) for k in row) for row in self.indices[self.active]]

    def position(self, index: MultiIndex) -> int:
        """Column of a multi-index in this set."""
        target = np.asarray(index, dtype=np.int64)
        hits = np.flatnonzero((self.indices == target).all(axis=1))
        if hits.size == 0:
            raise KeyError(f"Multi-index {tuple(index)} not in basis")
        return int(hits[0])


def _members(kind: BasisKind, dim: int, degree: int) -> Iterator[MultiIndex]:
    """Yield every member of the index set (unordered)."""

    def recurse(prefix: Tuple[int, ...], budget: int) -> Iterator[MultiIndex]:
        if len(prefix) == dim:
            yield prefix
            return
        if kind is BasisKind.TOTAL_DEGREE:
            for k in range(budget + 1):
                yield from recurse(prefix + (k,), budget - k)
        elif kind is BasisKind.TENSOR_PRODUCT:
            for k in range(degree + 1):
                yield from recurse(prefix + (k,), budget)
        else:
            # budget is the remaining bound on prod(k_i + 1)
            k = 0
            while k + 1 <= budget:
                yield from recurse(prefix + (k,), budget // (k + 1))
                k += 1

    start = degree + 1 if kind is BasisKind.HYPERBOLIC_CROSS else degree
    yield from recurse((), start)


def enumerate_indices(spec: BasisSpec) -> MultiIndexSet:
    """
    Build the index set for a basis specification.

    Ordering is graded lexicographic: by total degree first, then lexicographic
    on the tuple. All indices start active.

    Args:
        spec: Basis kind, dimension and degree

    Returns:
        MultiIndexSet with every member active
    """
    members = sorted(_members(spec.kind, spec.dim, spec.degree), key=lambda t: (sum(t), t))
    indices = np.array(members, dtype=np.int64).reshape(len(members), spec.dim)
    return MultiIndexSet(spec=spec, indices=indices)


def cardinality_formula(spec: BasisSpec) -> int:
    """Closed-form size for tensor-product and total-degree sets."""
    if spec.kind is BasisKind.TENSOR_PRODUCT:
        return (spec.degree + 1) ** spec.dim
    if spec.kind is BasisKind.TOTAL_DEGREE:
        return math.comb(spec.dim + spec.degree, spec.dim)
    raise ConfigurationError("Hyperbolic-cross sets have no closed-form cardinality")


def degree_schedule(n_points: int, c: float, offset: int, doubled: bool) -> int:
    """
    Polynomial degree as a function of the training-set size.

    Returns 2 * (ceil(c * N) + offset) when doubled, else ceil(c * N) + offset.
    """
    if n_points < 1:
        raise ConfigurationError(f"N must be >= 1, got {n_points}")
    if c <= 0:
        raise ConfigurationError(f"Schedule constant c must be > 0, got {c}")
    if offset < 0:
        raise ConfigurationError(f"Schedule offset must be >= 0, got {offset}")
    # c * N may land a hair above an integer, e.g. 0.003 * 1000
    base = math.ceil(round(c * n_points, 9)) + offset
    return 2 * base if doubled else base
