"""
Polynomial-Augmented Neural Network
u(x) = sum_j a_j psi_j(x) + sum_k b_k phi_k(x): a small MLP plus a trainable
Legendre layer, with truncation masks on both coefficient vectors.
"""

from dataclasses import dataclass, field
from typing import List, Optional
import logging

import numpy as np

from src.errors import ConfigurationError
from src.network import (
    FeatureEval,
    MlpConfig,
    MlpGradient,
    MlpParams,
    forward_features,
    init_params,
)
from src.polybasis import (
    DesignBundle,
    MultiIndex,
    MultiIndexSet,
    assemble_design,
)


logger = logging.getLogger("model.pann")


@dataclass
class PannGradient:
    """Gradient record with the same layout as a PannModel's parameters."""

    mlp: MlpGradient
    poly: np.ndarray

    def l2_norm(self) -> float:
        parts = [g.ravel() for g in self.mlp.weights + self.mlp.biases]
        parts += [self.mlp.coeffs, self.poly]
        return float(np.sqrt(sum(float(p @ p) for p in parts)))


@dataclass
class TruncationReport:
    pct_nn_truncated: float
    pct_poly_truncated: float
    surviving_poly_indices: List[MultiIndex] = field(default_factory=list)

    def as_label(self) -> str:
        """The "%NN/%PL" form used in truncation tables."""
        return f"{self.pct_nn_truncated:.1f}/{self.pct_poly_truncated:.1f}"


class PannModel:
    """
    A PANN: network parameters, polynomial basis, polynomial coefficients.

    A model with no hidden layers is the standalone polynomial layer; a model
    without a basis is a plain network.
    """

    def __init__(
        self,
        mlp_config: MlpConfig,
        mlp: MlpParams,
        basis: Optional[MultiIndexSet],
        poly_coeffs: Optional[np.ndarray] = None,
    ):
        self.mlp_config = mlp_config
        self.mlp = mlp
        self.basis = basis
        m = basis.cardinality if basis is not None else 0
        if poly_coeffs is None:
            poly_coeffs = np.zeros(m)
        self.poly_coeffs = np.asarray(poly_coeffs, dtype=np.float64)
        if self.poly_coeffs.shape != (m,):
            raise ConfigurationError(
                f"Polynomial coefficients have shape {self.poly_coeffs.shape}, basis has {m} terms"
            )
        if basis is not None and basis.dim != mlp_config.input_dim:
            raise ConfigurationError(
                f"Basis dimension {basis.dim} does not match network input {mlp_config.input_dim}"
            )

    @classmethod
    def create(
        cls,
        mlp_config: MlpConfig,
        basis: Optional[MultiIndexSet],
        seed: int,
    ) -> "PannModel":
        """Fresh model: initialized network, zero polynomial coefficients."""
        return cls(mlp_config, init_params(mlp_config, seed), basis)

    @property
    def dim(self) -> int:
        return self.mlp_config.input_dim

    @property
    def width(self) -> int:
        return self.mlp_config.width

    @property
    def n_basis(self) -> int:
        return self.basis.cardinality if self.basis is not None else 0

    @property
    def poly_mask(self) -> np.ndarray:
        if self.basis is None:
            return np.zeros(0, dtype=bool)
        return self.basis.active

    @property
    def effective_poly_coeffs(self) -> np.ndarray:
        return np.where(self.poly_mask, self.poly_coeffs, 0.0)

    def design(
        self, points: np.ndarray, with_laplacian: bool = False
    ) -> DesignBundle:
        """Assemble this model's polynomial design at a point set."""
        if self.basis is None:
            return DesignBundle.empty(len(points), self.dim, with_laplacian)
        return assemble_design(self.basis, points, with_laplacian=with_laplacian)

    def check_bundle(self, bundle: DesignBundle):
        if bundle.n_basis != self.n_basis:
            raise ConfigurationError(
                f"Stale design: {bundle.n_basis} columns for a {self.n_basis}-term basis"
            )

    def features(self, points: np.ndarray, need_laplacian: bool = False) -> FeatureEval:
        return forward_features(self.mlp, self.mlp_config, points, need_laplacian=need_laplacian)

    def combine(self, evaluation: FeatureEval, bundle: DesignBundle) -> np.ndarray:
        """Psi a + Phi b with masked coefficients."""
        self.check_bundle(bundle)
        return evaluation.nn_values + bundle.phi @ self.effective_poly_coeffs

    def predict(self, points: np.ndarray, bundle: DesignBundle) -> np.ndarray:
        """
        Model output at points whose design is already assembled.

        Args:
            points: (n, d) inputs
            bundle: DesignBundle for the same points and basis

        Returns:
            (n,) predictions
        """
        return self.combine(self.features(points), bundle)

    def evaluate(self, points: np.ndarray, batch_size: int = 8192) -> np.ndarray:
        """Predict at arbitrary points, assembling designs in row chunks."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = np.empty(len(points))
        for start in range(0, len(points), batch_size):
            chunk = points[start : start + batch_size]
            out[start : start + len(chunk)] = self.predict(chunk, self.design(chunk))
        return out

    def truncate(self, threshold: float) -> TruncationReport:
        """
        Mask every coefficient with magnitude strictly below the threshold.

        Masked coefficients are set to exactly zero and never come back.
        """
        if threshold < 0:
            raise ConfigurationError(f"Truncation threshold must be >= 0, got {threshold}")
        nn_cut = np.abs(self.mlp.coeffs) < threshold
        self.mlp.mask &= ~nn_cut
        self.mlp.coeffs[~self.mlp.mask] = 0.0
        if self.basis is not None:
            poly_cut = np.abs(self.poly_coeffs) < threshold
            self.basis.active &= ~poly_cut
            self.poly_coeffs[~self.basis.active] = 0.0
        report = self.truncation_report()
        logger.info(
            f"Truncation at t={threshold:g}: {report.as_label()} (%NN/%PL), "
            f"{len(report.surviving_poly_indices)} polynomial terms survive"
        )
        return report

    def truncation_report(self) -> TruncationReport:
        w, m = self.width, self.n_basis
        pct_nn = 100.0 * (w - int(self.mlp.mask.sum())) / w if w else 0.0
        pct_poly = 100.0 * (m - int(self.poly_mask.sum())) / m if m else 0.0
        survivors = self.basis.active_indices() if self.basis is not None else []
        return TruncationReport(pct_nn, pct_poly, survivors)

    # -- flat parameter vectors for the optimizers --------------------------

    def pack(self) -> np.ndarray:
        """Free parameters as one vector; masked coefficients are excluded."""
        parts = []
        for W, b in zip(self.mlp.weights, self.mlp.biases):
            parts += [W.ravel(), b]
        parts += [self.mlp.coeffs[self.mlp.mask], self.poly_coeffs[self.poly_mask]]
        return np.concatenate(parts) if parts else np.zeros(0)

    @property
    def n_free(self) -> int:
        """Length of the vector pack() returns."""
        hidden = sum(W.size + b.size for W, b in zip(self.mlp.weights, self.mlp.biases))
        return hidden + int(self.mlp.mask.sum()) + int(self.poly_mask.sum())

    def unpack(self, theta: np.ndarray):
        """
        Inverse of pack; masked coefficients stay zero.

        Raises:
            ConfigurationError: theta has the wrong length (the model is left untouched)
        """
        theta = np.asarray(theta, dtype=np.float64).ravel()
        if theta.size != self.n_free:
            raise ConfigurationError(f"Parameter vector has {theta.size} entries, expected {self.n_free}")
        offset = 0
        for W, b in zip(self.mlp.weights, self.mlp.biases):
            W[...] = theta[offset : offset + W.size].reshape(W.shape)
            offset += W.size
            b[...] = theta[offset : offset + b.size]
            offset += b.size
        n_a = int(self.mlp.mask.sum())
        self.mlp.coeffs[:] = 0.0
        self.mlp.coeffs[self.mlp.mask] = theta[offset : offset + n_a]
        offset += n_a
        n_b = int(self.poly_mask.sum())
        self.poly_coeffs[:] = 0.0
        self.poly_coeffs[self.poly_mask] = theta[offset : offset + n_b]

    def pack_gradient(self, grad: PannGradient) -> np.ndarray:
        parts = []
        for gW, gb in zip(grad.mlp.weights, grad.mlp.biases):
            parts += [gW.ravel(), gb]
        parts += [grad.mlp.coeffs[self.mlp.mask], grad.poly[self.poly_mask]]
        return np.concatenate(parts) if parts else np.zeros(0)

    def copy(self) -> "PannModel":
        basis = None
        if self.basis is not None:
            basis = MultiIndexSet(self.basis.spec, self.basis.indices.copy(), self.basis.active.copy())
        return PannModel(self.mlp_config, self.mlp.copy(), basis, self.poly_coeffs.copy())


def predict(model: PannModel, points: np.ndarray, bundle: DesignBundle) -> np.ndarray:
    return model.predict(points, bundle)


def truncate(model: PannModel, threshold: float) -> TruncationReport:
    return model.truncate(threshold)
