"""
Optim Module
Adam, L-BFGS and the two-phase training pipeline with truncation.
"""

from .report import AdamConfig, LbfgsConfig, LossFn, TrainReport
from .adam import adam_run, cosine_lr
from .lbfgs import lbfgs_run, strong_wolfe_search
from .pipeline import (
    CoefficientWhitening,
    LossBinding,
    pde_binding,
    regression_binding,
    train_pipeline,
)

__all__ = [
    "AdamConfig",
    "LbfgsConfig",
    "LossFn",
    "TrainReport",
    "adam_run",
    "cosine_lr",
    "lbfgs_run",
    "strong_wolfe_search",
    "CoefficientWhitening",
    "LossBinding",
    "pde_binding",
    "regression_binding",
    "train_pipeline",
]
