"""
Multilayer Perceptron
A small fully connected network read as an adaptive basis: the last hidden
layer produces features psi_j(x), and the network output is sum_j a_j psi_j(x).

Input-space Laplacians are propagated forward exactly, layer by layer, as
(value, d/dx_j, d^2/dx_j^2) triples for every input dimension j. The reverse
pass differentiates that forward computation, which needs the activation's
third derivative.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from src.errors import ConfigurationError, InternalError, UnsupportedOperation


logger = logging.getLogger("network.mlp")


class ActivationKind(str, Enum):
    TANH = "tanh"
    RELU = "relu"
    REPU = "repu"


@dataclass(frozen=True)
class Activation:
    kind: ActivationKind = ActivationKind.TANH
    repu_power: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kind", ActivationKind(self.kind))
        if self.kind is ActivationKind.REPU and self.repu_power < 2:
            raise ConfigurationError(f"RePU power must be >= 2, got {self.repu_power}")

    def derivatives(self, z: np.ndarray, order: int) -> List[np.ndarray]:
        """
        Activation value and derivatives up to `order` (at most 3).

        ReLU has zero second and third derivatives everywhere.
        """
        if self.kind is ActivationKind.TANH:
            t = np.tanh(z)
            s = 1.0 - t * t
            out = [t, s, -2.0 * t * s, s * (6.0 * t * t - 2.0)]
        elif self.kind is ActivationKind.RELU:
            positive = (z > 0).astype(z.dtype)
            zero = np.zeros_like(z)
            out = [z * positive, positive, zero, zero]
        else:
            p = self.repu_power
            zp = np.where(z > 0, z, 0.0)
            out = []
            coeff = 1.0
            for k in range(4):
                if k > p:
                    out.append(np.zeros_like(z))
                    continue
                out.append(coeff * zp ** (p - k) if p - k > 0 else coeff * (z > 0).astype(z.dtype))
                coeff *= p - k
        return out[: order + 1]


@dataclass
class MlpConfig:
    """
    Network shape.

    An empty hidden_widths list means "no network": zero features, output 0.
    """

    input_dim: int
    hidden_widths: Sequence[int] = (100, 100, 100)
    activation: Activation = field(default_factory=Activation)

    def __post_init__(self):
        self.hidden_widths = tuple(int(w) for w in self.hidden_widths)
        if self.input_dim < 1:
            raise ConfigurationError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(w < 1 for w in self.hidden_widths):
            raise ConfigurationError(f"All hidden widths must be >= 1, got {self.hidden_widths}")

    @property
    def width(self) -> int:
        return self.hidden_widths[-1] if self.hidden_widths else 0


@dataclass
class MlpParams:
    """Hidden weights/biases (theta^h), output coefficients a and their mask."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    coeffs: np.ndarray
    mask: np.ndarray

    @property
    def effective_coeffs(self) -> np.ndarray:
        return np.where(self.mask, self.coeffs, 0.0)

    def copy(self) -> "MlpParams":
        return MlpParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            coeffs=self.coeffs.copy(),
            mask=self.mask.copy(),
        )


@dataclass
class MlpGradient:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    coeffs: np.ndarray


@dataclass
class FeatureEval:
    """
    Result of a forward pass.

    Attributes:
        features: (n, w) psi_j(x_i)
        nn_values: (n,) network output N(x_i)
        feature_grads: (n, w, d) input gradients of psi, when requested
        feature_laplacians: (n, w) sum_j d^2 psi / dx_j^2, when requested
        nn_laplacian: (n,) Laplacian of N, when requested
    """

    features: np.ndarray
    nn_values: np.ndarray
    feature_grads: Optional[np.ndarray] = None
    feature_laplacians: Optional[np.ndarray] = None
    nn_laplacian: Optional[np.ndarray] = None
    _tape: list = field(default_factory=list, repr=False)

    @property
    def has_laplacian(self) -> bool:
        return self.feature_laplacians is not None


@dataclass
class Upstream:
    """
    Loss gradients flowing into the network outputs.

    Any field may be None. d_values/d_laplacian are w.r.t. N(x_i) and Delta N(x_i);
    d_features/d_feature_laplacians are w.r.t. psi and Delta psi directly.
    """

    d_values: Optional[np.ndarray] = None
    d_laplacian: Optional[np.ndarray] = None
    d_features: Optional[np.ndarray] = None
    d_feature_laplacians: Optional[np.ndarray] = None


def init_params(config: MlpConfig, seed: int) -> MlpParams:
    """
    Glorot-uniform hidden weights, zero biases, Glorot-uniform output
    coefficients over fan-in w, all coefficients unmasked.
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    fan_in = config.input_dim
    for width in config.hidden_widths:
        limit = np.sqrt(6.0 / (fan_in + width))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, width)))
        biases.append(np.zeros(width))
        fan_in = width
    w = config.width
    limit = np.sqrt(6.0 / (w + 1)) if w else 0.0
    coeffs = rng.uniform(-limit, limit, size=w)
    return MlpParams(weights=weights, biases=biases, coeffs=coeffs, mask=np.ones(w, dtype=bool))


def forward_features(
    params: MlpParams,
    config: MlpConfig,
    points: np.ndarray,
    need_laplacian: bool = False,
    need_gradient: bool = False,
) -> FeatureEval:
    """
    Evaluate the hidden stack and the network output at a point set.

    Args:
        params: Network parameters
        config: Network shape and activation
        points: (n, d) inputs
        need_laplacian: Propagate exact per-feature Laplacians
        need_gradient: Propagate input gradients of the features

    Returns:
        FeatureEval carrying the tape needed by backward_params
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n, d = points.shape
    if d != config.input_dim:
        raise ConfigurationError(f"Points have dimension {d}, network expects {config.input_dim}")
    if (
        need_laplacian
        and config.activation.kind is ActivationKind.REPU
        and config.activation.repu_power < 2
    ):
        raise UnsupportedOperation("RePU Laplacians need repu_power >= 2")

    a_eff = params.effective_coeffs
    if not config.hidden_widths:
        zeros = np.zeros((n, 0))
        return FeatureEval(
            features=zeros,
            nn_values=np.zeros(n),
            feature_grads=np.zeros((n, 0, d)) if need_gradient else None,
            feature_laplacians=zeros.copy() if need_laplacian else None,
            nn_laplacian=np.zeros(n) if need_laplacian else None,
        )

    track = need_laplacian or need_gradient
    order = 2 if need_laplacian else (1 if need_gradient else 0)
    h = points
    hd = np.broadcast_to(np.eye(d)[:, None, :], (d, n, d)) if track else None
    hdd = np.zeros((d, n, d)) if need_laplacian else None
    tape = []
    for W, b in zip(params.weights, params.biases):
        z = h @ W + b
        zd = hd @ W if track else None
        zdd = hdd @ W if need_laplacian else None
        sig = config.activation.derivatives(z, 3 if need_laplacian else 1)
        tape.append((h, hd, hdd, W, zd, zdd, sig))
        h = sig[0]
        if track:
            hd_next = sig[1] * zd
            if need_laplacian:
                hdd = sig[2] * zd * zd + sig[1] * zdd
            hd = hd_next

    features = h
    result = FeatureEval(features=features, nn_values=features @ a_eff, _tape=tape)
    if need_gradient:
        result.feature_grads = np.transpose(hd, (1, 2, 0)).copy()
    if need_laplacian:
        result.feature_laplacians = hdd.sum(axis=0)
        result.nn_laplacian = result.feature_laplacians @ a_eff
    logger.debug(f"Forward pass: n={n}, width={config.width}, order={order}")
    return result


def backward_params(
    params: MlpParams,
    evaluation: FeatureEval,
    upstream: Upstream,
) -> MlpGradient:
    """
    Exact gradients of a scalar loss with respect to every network parameter.

    Args:
        params: Parameters used in the forward pass
        evaluation: The FeatureEval returned by forward_features
        upstream: Loss gradients w.r.t. network outputs and/or features

    Returns:
        MlpGradient; masked output coefficients get exactly zero
    """
    n, w = evaluation.features.shape
    a_eff = params.effective_coeffs

    grad_a = np.zeros(w)
    g_psi = np.zeros((n, w))
    g_lap = np.zeros((n, w))
    lap_used = False
    if upstream.d_values is not None:
        dv = np.asarray(upstream.d_values, dtype=np.float64)
        if dv.shape != (n,):
            raise InternalError(f"d_values has shape {dv.shape}, expected {(n,)}")
        grad_a += evaluation.features.T @ dv
        g_psi += np.outer(dv, a_eff)
    if upstream.d_features is not None:
        if upstream.d_features.shape != (n, w):
            raise InternalError(f"d_features has shape {upstream.d_features.shape}, expected {(n, w)}")
        g_psi += upstream.d_features
    if upstream.d_laplacian is not None or upstream.d_feature_laplacians is not None:
        if not evaluation.has_laplacian:
            raise InternalError("Laplacian upstream given but forward pass had no Laplacians")
        lap_used = True
        if upstream.d_laplacian is not None:
            dl = np.asarray(upstream.d_laplacian, dtype=np.float64)
            if dl.shape != (n,):
                raise InternalError(f"d_laplacian has shape {dl.shape}, expected {(n,)}")
            grad_a += evaluation.feature_laplacians.T @ dl
            g_lap += np.outer(dl, a_eff)
        if upstream.d_feature_laplacians is not None:
            g_lap += upstream.d_feature_laplacians
    grad_a = np.where(params.mask, grad_a, 0.0)

    grad_w: List[np.ndarray] = [None] * len(params.weights)
    grad_b: List[np.ndarray] = [None] * len(params.biases)
    if not evaluation._tape:
        return MlpGradient(weights=[], biases=[], coeffs=grad_a)

    d = evaluation._tape[0][4].shape[0] if evaluation._tape[0][4] is not None else 0
    gh = g_psi
    ghd = np.zeros((d, n, w)) if lap_used else None
    ghdd = np.broadcast_to(g_lap, (d, n, w)) if lap_used else None

    for layer in range(len(evaluation._tape) - 1, -1, -1):
        h_in, hd_in, hdd_in, W, zd, zdd, sig = evaluation._tape[layer]
        gz = gh * sig[1]
        if lap_used:
            s1, s2, s3 = sig[1], sig[2], sig[3]
            gz = gz + (ghd * s2 * zd + ghdd * (s3 * zd * zd + s2 * zdd)).sum(axis=0)
            gzd = ghd * s1 + 2.0 * ghdd * s2 * zd
            gzdd = ghdd * s1
        grad_w[layer] = h_in.T @ gz
        grad_b[layer] = gz.sum(axis=0)
        if lap_used:
            grad_w[layer] += np.einsum("dni,dno->io", hd_in, gzd)
            grad_w[layer] += np.einsum("dni,dno->io", hdd_in, gzdd)
        if layer > 0:
            gh = gz @ W.T
            if lap_used:
                ghd = gzd @ W.T
                ghdd = gzdd @ W.T
    return MlpGradient(weights=grad_w, biases=grad_b, coeffs=grad_a)
