"""
Network Module
Fully connected network with exact parameter gradients and input Laplacians.
"""

from .mlp import (
    Activation,
    ActivationKind,
    FeatureEval,
    MlpConfig,
    MlpGradient,
    MlpParams,
    Upstream,
    backward_params,
    forward_features,
    init_params,
)

__all__ = [
    "Activation",
    "ActivationKind",
    "FeatureEval",
    "MlpConfig",
    "MlpGradient",
    "MlpParams",
    "Upstream",
    "backward_params",
    "forward_features",
    "init_params",
]
