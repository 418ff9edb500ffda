"""
Tabular Datasets
CSV ingestion with per-feature min-max scaling to [-1, 1], and k-fold splits.
Cross-validation folds are scaled with their own training rows' statistics.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union
import logging

import numpy as np
import pandas as pd

from src.errors import ConfigurationError, DataError


logger = logging.getLogger("harness.datasets")


@dataclass(frozen=True)
class FeatureScaling:
    """Per-feature affine map [min, max] -> [-1, 1]."""

    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray, names: List[str] = None) -> "FeatureScaling":
        minimum = features.min(axis=0)
        maximum = features.max(axis=0)
        flat = np.flatnonzero(maximum - minimum == 0.0)
        if flat.size:
            labels = [names[i] if names else str(i) for i in flat]
            raise DataError(f"Zero-range (constant) feature column(s): {', '.join(labels)}")
        return cls(minimum=minimum, maximum=maximum)

    def scale(self, features: np.ndarray) -> np.ndarray:
        return 2.0 * (features - self.minimum) / (self.maximum - self.minimum) - 1.0

    def unscale(self, scaled: np.ndarray) -> np.ndarray:
        return (scaled + 1.0) * 0.5 * (self.maximum - self.minimum) + self.minimum


def _target_scale(targets: np.ndarray) -> float:
    largest = float(np.max(np.abs(targets)))
    return largest if largest > 0.0 else 1.0


@dataclass
class Dataset:
    """
    Raw features and targets, plus a whole-file scaled view.

    points and targets use statistics of every row: features mapped to
    [-1, 1], targets divided by target_scale (their largest magnitude).
    Relative errors are unaffected by the target scale. Model fitting goes
    through split(), which refits both on the training rows only.
    """

    features: np.ndarray
    raw_targets: np.ndarray
    points: np.ndarray
    targets: np.ndarray
    scaling: FeatureScaling
    feature_names: List[str]
    target_name: str
    target_scale: float = 1.0

    @property
    def n_rows(self) -> int:
        return len(self.targets)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def split(
        self, train_idx: np.ndarray, test_idx: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Scale one train/test partition using training statistics.

        Test rows can land slightly outside [-1, 1].

        Returns:
            Tuple of (train points, train targets, test points, test targets)

        Raises:
            DataError: a feature is constant across the training rows
        """
        scaling = FeatureScaling.fit(self.features[train_idx], self.feature_names)
        target_scale = _target_scale(self.raw_targets[train_idx])
        return (
            scaling.scale(self.features[train_idx]),
            self.raw_targets[train_idx] / target_scale,
            scaling.scale(self.features[test_idx]),
            self.raw_targets[test_idx] / target_scale,
        )


def load_csv_dataset(path: Union[str, Path], target_column: str) -> Dataset:
    """
    Load a numeric CSV with a header row.

    Args:
        path: CSV file
        target_column: Name of the column to predict; all others are features

    Returns:
        Dataset with features scaled to [-1, 1]

    Raises:
        DataError: missing file or column, empty file, non-numeric cells
            (reported with their file line numbers), constant feature columns
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Dataset file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        raise DataError(f"Dataset file is empty: {path}") from e
    if frame.empty:
        raise DataError(f"Dataset file has a header but no rows: {path}")
    frame.columns = [c.strip() for c in frame.columns]
    if target_column not in frame.columns:
        raise DataError(
            f"Target column '{target_column}' not in {path}; columns are {list(frame.columns)}"
        )

    numeric = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad_rows = numeric.isna().any(axis=1) | ~np.isfinite(numeric.to_numpy(dtype=np.float64)).all(axis=1)
    if bad_rows.any():
        # header is line 1
        lines = (np.flatnonzero(bad_rows.to_numpy()) + 2).tolist()
        shown = ", ".join(str(n) for n in lines[:10])
        more = f" (and {len(lines) - 10} more)" if len(lines) > 10 else ""
        raise DataError(f"Non-numeric or missing cells in {path} at line(s) {shown}{more}")

    feature_names = [c for c in numeric.columns if c != target_column]
    if not feature_names:
        raise DataError(f"{path} has no feature columns besides '{target_column}'")
    features = numeric[feature_names].to_numpy(dtype=np.float64)
    targets = numeric[target_column].to_numpy(dtype=np.float64)

    scaling = FeatureScaling.fit(features, feature_names)
    target_scale = _target_scale(targets)
    dataset = Dataset(
        features=features,
        raw_targets=targets,
        points=scaling.scale(features),
        targets=targets / target_scale,
        scaling=scaling,
        feature_names=feature_names,
        target_name=target_column,
        target_scale=target_scale,
    )
    logger.info(f"Loaded {dataset.n_rows} rows with {dataset.dim} features from {path}")
    return dataset


def kfold_split(n: int, k: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Seeded shuffle into k contiguous folds whose sizes differ by at most one.

    Returns:
        List of (train indices, test indices); the test folds partition [0, n)
    """
    if k < 2:
        raise ConfigurationError(f"k-fold needs k >= 2, got {k}")
    if n < k:
        raise ConfigurationError(f"Cannot split {n} rows into {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(order, k)
    splits = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        splits.append((train, test))
    return splits
