"""
Model Module
The PANN, its orthogonality constraints, losses, truncation and checkpoints.
"""

from .pann import PannGradient, PannModel, TruncationReport, predict, truncate
from .constraints import ConstraintKind, ConstraintResult, constraint_penalty
from .losses import L1Scope, LossConfig, LossResult, pde_loss, regression_loss
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "PannGradient",
    "PannModel",
    "TruncationReport",
    "predict",
    "truncate",
    "ConstraintKind",
    "ConstraintResult",
    "constraint_penalty",
    "L1Scope",
    "LossConfig",
    "LossResult",
    "pde_loss",
    "regression_loss",
    "load_checkpoint",
    "save_checkpoint",
]
