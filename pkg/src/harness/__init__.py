"""
Harness Module
Point sampling, synthetic targets, tabular datasets and error metrics.

The experiment configuration and runner live in src.harness.config and
src.harness.experiment and are imported from there.
"""

from .sampling import (
    BoundaryMode,
    SamplingMode,
    boundary_points,
    evaluation_grid,
    sample_points,
)
from .targets import TargetKind, synthetic_target
from .datasets import Dataset, FeatureScaling, kfold_split, load_csv_dataset
from .metrics import relative_l2_error

__all__ = [
    "BoundaryMode",
    "SamplingMode",
    "boundary_points",
    "evaluation_grid",
    "sample_points",
    "TargetKind",
    "synthetic_target",
    "Dataset",
    "FeatureScaling",
    "kfold_split",
    "load_csv_dataset",
    "relative_l2_error",
]
