"""
PANN Losses
Preconditioned, regularized objectives for regression and physics-informed
training, each returning the loss and its exact gradient.

    regression:  mean_i [K_i (u(x_i) - y_i)]^2
                 + lambda_r ||theta||_1 + lambda_c ||C||_F
    pde:         mean_b [K_b (u(x_b) - g(x_b))]^2
                 + lambda_pde mean_r [K_r (F[u](x_r) - f(x_r))]^2
                 + lambda_r ||theta||_1 + lambda_c ||C||_F
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.network import MlpGradient, Upstream, backward_params
from src.polybasis import DesignBundle
from .constraints import ConstraintKind, penalty_from_parts
from .pann import PannGradient, PannModel


logger = logging.getLogger("model.losses")


class L1Scope(str, Enum):
    ALL = "all"
    COEFFICIENTS = "coefficients"


class LossConfig(BaseModel):
    """Multipliers and switches for the PANN objective."""

    model_config = ConfigDict(frozen=True)

    lambda_r: float = Field(1e-5, ge=0, allow_inf_nan=False)
    lambda_c: float = Field(1e-3, ge=0, allow_inf_nan=False)
    lambda_pde: float = Field(1.0, ge=0, allow_inf_nan=False)
    preconditioned: bool = True
    constraint: ConstraintKind = ConstraintKind.CE
    truncation_threshold: float = Field(1e-4, ge=0)
    l1_scope: L1Scope = L1Scope.ALL

    @property
    def effective_lambda_r(self) -> float:
        """L1 is off entirely when the constraint kind is "none"."""
        return 0.0 if self.constraint is ConstraintKind.NONE else self.lambda_r


@dataclass
class LossResult:
    loss: float
    gradient: PannGradient
    terms: Dict[str, float] = field(default_factory=dict)



def _l1(model: PannModel, cfg: LossConfig) -> tuple:
    """lambda_r ||theta||_1 and its subgradient (sign, 0 at 0)."""
    lam = cfg.effective_lambda_r
    a = model.mlp.effective_coeffs
    b = model.effective_poly_coeffs
    zeros_w = [np.zeros_like(W) for W in model.mlp.weights]
    zeros_b = [np.zeros_like(v) for v in model.mlp.biases]
    if lam == 0.0:
        return 0.0, MlpGradient(zeros_w, zeros_b, np.zeros_like(a)), np.zeros_like(b)
    value = np.abs(a).sum() + np.abs(b).sum()
    grad_w, grad_bias = zeros_w, zeros_b
    if cfg.l1_scope is L1Scope.ALL:
        value += sum(np.abs(W).sum() for W in model.mlp.weights)
        value += sum(np.abs(v).sum() for v in model.mlp.biases)
        grad_w = [lam * np.sign(W) for W in model.mlp.weights]
        grad_bias = [lam * np.sign(v) for v in model.mlp.biases]
    return (
        lam * float(value),
        MlpGradient(grad_w, grad_bias, lam * np.sign(a)),
        lam * np.sign(b),
    )


def _assemble_gradient(
    model: PannModel,
    mlp_grads: List[MlpGradient],
    extra_a: np.ndarray,
    grad_b: np.ndarray,
) -> PannGradient:
    weights = [sum(g.weights[i] for g in mlp_grads) for i in range(len(model.mlp.weights))]
    biases = [sum(g.biases[i] for g in mlp_grads) for i in range(len(model.mlp.biases))]
    coeffs = sum(g.coeffs for g in mlp_grads) + extra_a
    return PannGradient(
        mlp=MlpGradient(weights, biases, np.where(model.mlp.mask, coeffs, 0.0)),
        poly=np.where(model.poly_mask, grad_b, 0.0),
    )


def regression_loss(
    model: PannModel,
    points: np.ndarray,
    targets: np.ndarray,
    bundle: DesignBundle,
    cfg: LossConfig,
) -> LossResult:
    """
    Regression objective and gradient.

    Args:
        model: The PANN being trained
        points: (n, d) training inputs
        targets: (n,) training targets
        bundle: Design at the training points (precond filled when cfg.preconditioned)
        cfg: Loss multipliers and switches

    Returns:
        LossResult with loss, gradient and the individual terms
    """
    model.check_bundle(bundle)
    targets = np.asarray(targets, dtype=np.float64)
    n = len(targets)
    evaluation = model.features(points)
    u = model.combine(evaluation, bundle)
    K = bundle.row_weights(cfg.preconditioned)
    residual = K * (u - targets)
    data = float(np.mean(residual * residual))
    d_u = 2.0 * K * residual / n

    constraint = penalty_from_parts(
        model.mlp.effective_coeffs,
        model.mlp.mask,
        model.effective_poly_coeffs,
        model.poly_mask,
        [(evaluation, bundle)],
        cfg.constraint,
    )
    upstream = Upstream(d_values=d_u, d_features=cfg.lambda_c * constraint.grad_features[0])
    network_grad = backward_params(model.mlp, evaluation, upstream)
    l1_value, l1_mlp, l1_poly = _l1(model, cfg)

    grad_b = bundle.phi.T @ d_u + cfg.lambda_c * constraint.grad_b + l1_poly
    gradient = _assemble_gradient(
        model, [network_grad, l1_mlp], cfg.lambda_c * constraint.grad_a, grad_b
    )
    penalty = cfg.lambda_c * constraint.norm
    loss = data + l1_value + penalty
    return LossResult(
        loss=loss,
        gradient=gradient,
        terms={"data": data, "l1": l1_value, "constraint": penalty},
    )


def pde_loss(
    model: PannModel,
    boundary_pts: np.ndarray,
    boundary_vals: np.ndarray,
    collocation_pts: np.ndarray,
    f_vals: np.ndarray,
    boundary_bundle: DesignBundle,
    collocation_bundle: DesignBundle,
    problem,
    cfg: LossConfig,
) -> LossResult:
    """
    Physics-informed objective and gradient.

    The collocation bundle must carry lap_phi. The orthogonality constraint is
    evaluated on the union of boundary and collocation points.

    Args:
        problem: A PdeProblem; its apply_operator maps (u, Delta u) to F[u]
            and dF/du
    """
    model.check_bundle(boundary_bundle)
    model.check_bundle(collocation_bundle)
    boundary_vals = np.asarray(boundary_vals, dtype=np.float64)
    f_vals = np.asarray(f_vals, dtype=np.float64)
    n_b, n_r = len(boundary_vals), len(f_vals)
    b_eff = model.effective_poly_coeffs

    ev_b = model.features(boundary_pts)
    u_b = model.combine(ev_b, boundary_bundle)
    K_b = boundary_bundle.row_weights(cfg.preconditioned)
    res_b = K_b * (u_b - boundary_vals)
    boundary_term = float(np.mean(res_b * res_b))
    d_ub = 2.0 * K_b * res_b / n_b

    ev_r = model.features(collocation_pts, need_laplacian=True)
    u_r = model.combine(ev_r, collocation_bundle)
    lap_r = ev_r.nn_laplacian + collocation_bundle.lap_phi @ b_eff
    F, dF_du = problem.apply_operator(u_r, lap_r)
    K_r = collocation_bundle.row_weights(cfg.preconditioned)
    res_r = K_r * (F - f_vals)
    residual_term = cfg.lambda_pde * float(np.mean(res_r * res_r))
    d_F = cfg.lambda_pde * 2.0 * K_r * res_r / n_r
    d_ur = d_F * dF_du if dF_du is not None else np.zeros(n_r)

    constraint = penalty_from_parts(
        model.mlp.effective_coeffs,
        model.mlp.mask,
        b_eff,
        model.poly_mask,
        [(ev_b, boundary_bundle), (ev_r, collocation_bundle)],
        cfg.constraint,
    )
    grad_boundary = backward_params(
        model.mlp,
        ev_b,
        Upstream(d_values=d_ub, d_features=cfg.lambda_c * constraint.grad_features[0]),
    )
    grad_collocation = backward_params(
        model.mlp,
        ev_r,
        Upstream(
            d_values=d_ur,
            d_laplacian=d_F,
            d_features=cfg.lambda_c * constraint.grad_features[1],
        ),
    )
    l1_value, l1_mlp, l1_poly = _l1(model, cfg)

    grad_b = (
        boundary_bundle.phi.T @ d_ub
        + collocation_bundle.phi.T @ d_ur
        + collocation_bundle.lap_phi.T @ d_F
        + cfg.lambda_c * constraint.grad_b
        + l1_poly
    )
    gradient = _assemble_gradient(
        model,
        [grad_boundary, grad_collocation, l1_mlp],
        cfg.lambda_c * constraint.grad_a,
        grad_b,
    )
    penalty = cfg.lambda_c * constraint.norm
    loss = boundary_term + residual_term + l1_value + penalty
    return LossResult(
        loss=loss,
        gradient=gradient,
        terms={
            "boundary": boundary_term,
            "residual": residual_term,
            "l1": l1_value,
            "constraint": penalty,
        },
    )
