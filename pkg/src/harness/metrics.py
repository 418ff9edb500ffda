"""
Error Metrics
"""

import numpy as np

from src.errors import DataError


def relative_l2_error(pred: np.ndarray, truth: np.ndarray) -> float:
    """||truth - pred||_2 / ||truth||_2."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise DataError(f"Prediction has {pred.size} values, truth has {truth.size}")
    norm = float(np.linalg.norm(truth))
    if norm == 0.0:
        raise DataError("Relative error is undefined for a zero-norm truth vector")
    return float(np.linalg.norm(truth - pred)) / norm
