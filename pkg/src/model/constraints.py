"""
Orthogonality Constraints
Penalties that weakly push the network part N(x) = sum_j a_j psi_j(x) and the
polynomial part P(x) = sum_k b_k phi_k(x) towards mutual orthogonality.

Each constraint is an array C of pointwise products; the penalty is its
Frobenius norm over all training points.

    CA  N P                 (n entries)
    CB  N b_k phi_k         (n x m)
    CC  N phi_k             (n x m)
    CD  N b_k               (n x m)
    CE  P a_j psi_j         (n x w)
    CF  P psi_j             (n x w)
    CG  P a_j               (n x w)
    CH  a_j psi_j b_k phi_k (n x w x m)
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from src.network import FeatureEval
from src.polybasis import DesignBundle


NORM_FLOOR = 1e-12


class ConstraintKind(str, Enum):
    NONE = "none"
    L1_ONLY = "l1"
    CA = "ca"
    CB = "cb"
    CC = "cc"
    CD = "cd"
    CE = "ce"
    CF = "cf"
    CG = "cg"
    CH = "ch"

    @property
    def has_penalty(self) -> bool:
        return self not in (ConstraintKind.NONE, ConstraintKind.L1_ONLY)


@dataclass
class ConstraintResult:
    """
    Frobenius norm of C and its exact gradients.

    grad_features holds one (n_p, w) array per point set: the gradient w.r.t.
    psi, to be pushed through the hidden layers.
    """

    norm: float
    grad_a: np.ndarray
    grad_b: np.ndarray
    grad_features: List[np.ndarray]


def _sum_of_squares(
    kind: ConstraintKind,
    psi: np.ndarray,
    a: np.ndarray,
    a_mask: np.ndarray,
    phi: np.ndarray,
    b: np.ndarray,
    b_mask: np.ndarray,
) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """
    S = sum of squared entries of C at one point set, and dS w.r.t. a, b, psi.
    """
    n, w = psi.shape
    N = psi @ a
    P = phi @ b
    dN = np.zeros(n)
    dP = np.zeros(n)
    da = np.zeros(w)
    db = np.zeros(phi.shape[1])
    dpsi = np.zeros((n, w))

    if kind is ConstraintKind.CA:
        S = float(np.sum(N * N * P * P))
        dN = 2.0 * N * P * P
        dP = 2.0 * P * N * N
    elif kind is ConstraintKind.CB:
        phi2 = phi * phi
        Q = phi2 @ (b * b)
        S = float(np.sum(N * N * Q))
        dN = 2.0 * N * Q
        db = 2.0 * b * (phi2.T @ (N * N))
    elif kind is ConstraintKind.CC:
        R = (phi * phi) @ b_mask.astype(float)
        S = float(np.sum(N * N * R))
        dN = 2.0 * N * R
    elif kind is ConstraintKind.CD:
        sum_n2 = float(N @ N)
        sum_b2 = float(b @ b)
        S = sum_n2 * sum_b2
        dN = 2.0 * N * sum_b2
        db = 2.0 * b * sum_n2
    elif kind is ConstraintKind.CE:
        psi2 = psi * psi
        T = psi2 @ (a * a)
        S = float(np.sum(P * P * T))
        dP = 2.0 * P * T
        da = 2.0 * a * (psi2.T @ (P * P))
        dpsi = 2.0 * np.outer(P * P, a * a) * psi
    elif kind is ConstraintKind.CF:
        weights = a_mask.astype(float)
        U = (psi * psi) @ weights
        S = float(np.sum(P * P * U))
        dP = 2.0 * P * U
        dpsi = 2.0 * (P * P)[:, None] * psi * weights
    elif kind is ConstraintKind.CG:
        sum_p2 = float(P @ P)
        sum_a2 = float(a @ a)
        S = sum_p2 * sum_a2
        dP = 2.0 * P * sum_a2
        da = 2.0 * a * sum_p2
    elif kind is ConstraintKind.CH:
        psi2 = psi * psi
        phi2 = phi * phi
        T = psi2 @ (a * a)
        Q = phi2 @ (b * b)
        S = float(T @ Q)
        da = 2.0 * a * (psi2.T @ Q)
        dpsi = 2.0 * np.outer(Q, a * a) * psi
        db = 2.0 * b * (phi2.T @ T)
    else:
        S = 0.0

    grad_a = psi.T @ dN + da
    grad_features = np.outer(dN, a) + dpsi
    grad_b = phi.T @ dP + db
    return S, grad_a, grad_b, grad_features


def penalty_from_parts(
    a: np.ndarray,
    a_mask: np.ndarray,
    b: np.ndarray,
    b_mask: np.ndarray,
    parts: Sequence[Tuple[FeatureEval, DesignBundle]],
    kind: ConstraintKind,
) -> ConstraintResult:
    """
    Constraint norm over the union of several point sets.

    Args:
        a, b: Effective (masked) coefficient vectors
        a_mask, b_mask: Truncation masks
        parts: (forward pass, design) pairs, one per point set
        kind: Which constraint

    Returns:
        ConstraintResult; all-zero gradients when the norm is below 1e-12
    """
    kind = ConstraintKind(kind)
    w, m = a.shape[0], b.shape[0]
    zero = ConstraintResult(
        0.0, np.zeros(w), np.zeros(m), [np.zeros_like(ev.features) for ev, _ in parts]
    )
    if not kind.has_penalty:
        return zero

    total = 0.0
    grad_a = np.zeros(w)
    grad_b = np.zeros(m)
    grad_features = []
    for evaluation, bundle in parts:
        S, ga, gb, gf = _sum_of_squares(
            kind, evaluation.features, a, a_mask, bundle.phi, b, b_mask
        )
        total += S
        grad_a += ga
        grad_b += gb
        grad_features.append(gf)

    norm = float(np.sqrt(total))
    if norm < NORM_FLOOR:
        zero.norm = norm
        return zero
    scale = 0.5 / norm
    return ConstraintResult(
        norm=norm,
        grad_a=np.where(a_mask, grad_a * scale, 0.0),
        grad_b=np.where(b_mask, grad_b * scale, 0.0),
        grad_features=[gf * scale for gf in grad_features],
    )


def constraint_penalty(model, points: np.ndarray, bundle: DesignBundle, kind: ConstraintKind) -> ConstraintResult:
    """
    ||C||_F for a model at one point set, with exact gradients.

    Args:
        model: PannModel
        points: (n, d) evaluation points
        bundle: Design for the same points
        kind: Which constraint

    Returns:
        ConstraintResult with gradients w.r.t. a, b and the features psi
    """
    model.check_bundle(bundle)
    evaluation = model.features(points)
    return penalty_from_parts(
        model.mlp.effective_coeffs,
        model.mlp.mask,
        model.effective_poly_coeffs,
        model.poly_mask,
        [(evaluation, bundle)],
        kind,
    )
