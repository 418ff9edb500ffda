"""
Training Pipeline
Adam, truncation, L-BFGS on the survivors, final truncation.

L-BFGS sees the polynomial coefficients in whitened coordinates.
"""

from dataclasses import replace
from typing import Callable, Optional, Tuple
import logging

import numpy as np

from src.model import (
    LossConfig,
    LossResult,
    PannModel,
    TruncationReport,
    pde_loss,
    regression_loss,
)
from src.polybasis import DesignBundle, compute_preconditioner
from .adam import adam_run
from .lbfgs import lbfgs_run
from .report import AdamConfig, LbfgsConfig, TrainReport


logger = logging.getLogger("optim.pipeline")

Objective = Callable[[PannModel], LossResult]
PolyJacobian = Callable[[PannModel], np.ndarray]

# min |diag R| / max |diag R| below which whitening is skipped
WHITENING_RANK_TOL = 1e-10


class LossBinding:
    """
    Binds a model to an objective and exposes it over flat parameter vectors.

    Calling the binding writes theta into the model, so after an optimizer
    returns the caller must unpack the returned vector again.

    poly_jacobian, when given, maps the model to the matrix of the data
    residuals' derivatives with respect to every polynomial coefficient,
    rows scaled so the data misfit is the squared norm of the residual.
    """

    def __init__(
        self,
        model: PannModel,
        objective: Objective,
        poly_jacobian: Optional[PolyJacobian] = None,
    ):
        self.model = model
        self.objective = objective
        self.poly_jacobian = poly_jacobian
        self.last: Optional[LossResult] = None

    def __call__(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        self.model.unpack(theta)
        result = self.objective(self.model)
        self.last = result
        return result.loss, self.model.pack_gradient(result.gradient)


class CoefficientWhitening:
    """
    The binding seen in coordinates where the polynomial block of the data
    misfit has an identity Gram matrix.

    With the active Jacobian columns A = QR, the optimizer works on c = R b
    and the model always receives b = R^-1 c. Network parameters pass through
    unchanged, and the loss (L1 term included) is still evaluated on b.
    Falls back to the identity when the Jacobian is missing or rank deficient.
    """

    def __init__(self, binding: LossBinding):
        model = binding.model
        self.binding = binding
        self.n_poly = int(model.poly_mask.sum())
        self.offset = model.n_free - self.n_poly
        self.R: Optional[np.ndarray] = None
        self.R_inv: Optional[np.ndarray] = None
        if binding.poly_jacobian is None or self.n_poly == 0:
            return

        A = binding.poly_jacobian(model)[:, model.poly_mask]
        if A.shape[0] < self.n_poly or not np.all(np.isfinite(A)):
            logger.info("Polynomial Jacobian is underdetermined or non-finite; L-BFGS runs unwhitened")
            return
        R = np.linalg.qr(A, mode="r")
        diag = np.abs(np.diag(R))
        ratio = diag.min() / diag.max() if diag.max() > 0 else 0.0
        if ratio <= WHITENING_RANK_TOL:
            logger.info(
                f"Polynomial Jacobian is rank deficient (|R_kk| ratio {ratio:.1e}); "
                "L-BFGS runs unwhitened"
            )
            return
        self.R = R
        self.R_inv = np.linalg.inv(R)
        logger.debug(f"Whitening {self.n_poly} polynomial coefficients, |R_kk| in [{diag.min():.2e}, {diag.max():.2e}]")

    @property
    def active(self) -> bool:
        return self.R is not None

    def to_optimizer(self, theta: np.ndarray) -> np.ndarray:
        out = np.array(theta, dtype=np.float64, copy=True)
        if self.active:
            out[self.offset :] = self.R @ out[self.offset :]
        return out

    def to_model(self, theta_w: np.ndarray) -> np.ndarray:
        out = np.array(theta_w, dtype=np.float64, copy=True)
        if self.active:
            out[self.offset :] = self.R_inv @ out[self.offset :]
        return out

    def __call__(self, theta_w: np.ndarray) -> Tuple[float, np.ndarray]:
        loss, grad = self.binding(self.to_model(theta_w))
        if self.active:
            grad = grad.copy()
            grad[self.offset :] = self.R_inv.T @ grad[self.offset :]
        return loss, grad


def _with_preconditioner(model: PannModel, bundle: DesignBundle, cfg: LossConfig) -> DesignBundle:
    if not cfg.preconditioned:
        return bundle
    if model.basis is None or model.basis.n_active == 0:
        # no polynomial layer to weight by
        return replace(bundle, precond=np.ones(bundle.n_points))
    return compute_preconditioner(bundle, model.basis)


def regression_binding(
    model: PannModel, points: np.ndarray, targets: np.ndarray, cfg: LossConfig
) -> LossBinding:
    """Assemble the training design once and bind the regression loss to it."""
    bundle = _with_preconditioner(model, model.design(points), cfg)
    targets = np.asarray(targets, dtype=np.float64)
    scale = bundle.row_weights(cfg.preconditioned) / np.sqrt(bundle.n_points)

    def poly_jacobian(m: PannModel) -> np.ndarray:
        return bundle.phi * scale[:, None]

    return LossBinding(
        model, lambda m: regression_loss(m, points, targets, bundle, cfg), poly_jacobian
    )


def pde_binding(
    model: PannModel,
    problem,
    boundary_pts: np.ndarray,
    collocation_pts: np.ndarray,
    cfg: LossConfig,
) -> LossBinding:
    """Assemble boundary and collocation designs once and bind the PDE loss."""
    boundary_bundle = _with_preconditioner(model, model.design(boundary_pts), cfg)
    collocation_bundle = _with_preconditioner(
        model, model.design(collocation_pts, with_laplacian=True), cfg
    )
    g = problem.boundary(boundary_pts)
    f = problem.forcing(collocation_pts)
    scale_b = boundary_bundle.row_weights(cfg.preconditioned) / np.sqrt(boundary_bundle.n_points)
    scale_r = collocation_bundle.row_weights(cfg.preconditioned) * np.sqrt(
        cfg.lambda_pde / collocation_bundle.n_points
    )

    def poly_jacobian(m: PannModel) -> np.ndarray:
        # F is linearized at the current model for nonlinear operators
        u_r = m.predict(collocation_pts, collocation_bundle)
        _, dF_du = problem.apply_operator(u_r, np.zeros_like(u_r))
        interior = collocation_bundle.lap_phi
        if dF_du is not None:
            interior = interior + dF_du[:, None] * collocation_bundle.phi
        return np.vstack([boundary_bundle.phi * scale_b[:, None], interior * scale_r[:, None]])

    return LossBinding(
        model,
        lambda m: pde_loss(
            m,
            boundary_pts,
            g,
            collocation_pts,
            f,
            boundary_bundle,
            collocation_bundle,
            problem,
            cfg,
        ),
        poly_jacobian,
    )


def train_pipeline(
    binding: LossBinding,
    adam_cfg: AdamConfig,
    lbfgs_cfg: LbfgsConfig,
    truncation_threshold: float,
) -> Tuple[PannModel, TrainReport, TruncationReport]:
    """
    Run the full training sequence on the bound model.

    Steps:
        1. Adam on all free parameters
        2. Truncate coefficients below the threshold
        3. L-BFGS on the surviving parameters, polynomial block whitened
        4. Truncate again and report

    L-BFGS is skipped when Adam diverges.

    Returns:
        Tuple of (trained model, merged TrainReport, final TruncationReport)
    """
    model = binding.model
    logger.info(
        f"Training: width={model.width}, basis={model.n_basis} terms, "
        f"{model.pack().size} free parameters"
    )

    theta, adam_report = adam_run(binding, model.pack(), adam_cfg)
    model.unpack(theta)
    if adam_report.diverged:
        logger.error("Adam diverged; skipping L-BFGS")
        return model, TrainReport.merge([adam_report]), model.truncation_report()

    model.truncate(truncation_threshold)
    whitened = CoefficientWhitening(binding)
    theta, lbfgs_report = lbfgs_run(whitened, whitened.to_optimizer(model.pack()), lbfgs_cfg)
    lbfgs_report.settings["whitened"] = whitened.active
    model.unpack(whitened.to_model(theta))
    truncation = model.truncate(truncation_threshold)

    report = TrainReport.merge([adam_report, lbfgs_report])
    logger.info(
        f"Training finished: loss={report.final_loss:.6e}, truncated {truncation.as_label()} (%NN/%PL)"
    )
    return model, report, truncation
