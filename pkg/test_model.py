"""
Model Tests
PANN forward pass, orthogonality constraints, loss gradients, truncation and
checkpoints.
"""

import json

import numpy as np
import pytest

from src.errors import ConfigurationError, DataError
from src.evaluation.invariants import gradient_error, small_model
from src.model import (
    ConstraintKind,
    L1Scope,
    LossConfig,
    PannModel,
    constraint_penalty,
    load_checkpoint,
    regression_loss,
    save_checkpoint,
)
from src.network import Activation, ActivationKind, MlpConfig
from src.optim import pde_binding, regression_binding
from src.pde import manufactured_allen_cahn, manufactured_poisson
from src.polybasis import BasisKind, BasisSpec, assemble_design, enumerate_indices


def _data(n=20, seed=11):
    points = np.random.default_rng(seed).uniform(-1, 1, size=(n, 2))
    return points, np.sin(2 * points[:, 0]) * points[:, 1] + 0.3


def _edge():
    return np.array([[-1.0, 0.3], [1.0, -0.2], [0.5, 1.0], [-0.4, -1.0], [1.0, 1.0]])


# -- loss gradients -----------------------------------------------------------


@pytest.mark.parametrize("preconditioned", [True, False])
@pytest.mark.parametrize("activation", [ActivationKind.TANH, ActivationKind.REPU])
@pytest.mark.parametrize("kind", list(ConstraintKind))
def test_regression_gradient(kind, activation, preconditioned):
    model = small_model(activation, widths=(8,), degree=3)
    points, targets = _data()
    cfg = LossConfig(lambda_r=1e-3, lambda_c=1e-2, constraint=kind, preconditioned=preconditioned)
    binding = regression_binding(model, points, targets, cfg)
    assert gradient_error(binding, model.pack()) < 1e-5


def test_regression_gradient_relu():
    model = small_model(ActivationKind.RELU, widths=(8,), degree=3)
    points, targets = _data()
    binding = regression_binding(model, points, targets, LossConfig(lambda_c=1e-2))
    assert gradient_error(binding, model.pack()) < 1e-4


def test_regression_gradient_coefficient_l1_scope():
    model = small_model()
    points, targets = _data()
    cfg = LossConfig(lambda_r=1e-2, l1_scope=L1Scope.COEFFICIENTS)
    binding = regression_binding(model, points, targets, cfg)
    assert gradient_error(binding, model.pack()) < 1e-5


@pytest.mark.parametrize("kind", [ConstraintKind.CE, ConstraintKind.CB, ConstraintKind.L1_ONLY])
@pytest.mark.parametrize("make_problem", [manufactured_poisson, manufactured_allen_cahn])
def test_pde_gradient(make_problem, kind):
    model = small_model(widths=(5, 4))
    interior = np.random.default_rng(5).uniform(-1, 1, size=(20, 2))
    cfg = LossConfig(lambda_r=1e-4, lambda_c=1e-2, lambda_pde=0.5, constraint=kind)
    binding = pde_binding(model, make_problem(), _edge(), interior, cfg)
    assert gradient_error(binding, model.pack()) < 1e-5


def test_pde_gradient_after_truncation():
    model = small_model(widths=(5, 4))
    model.truncate(0.3)
    interior = np.random.default_rng(8).uniform(-1, 1, size=(15, 2))
    binding = pde_binding(model, manufactured_allen_cahn(), _edge(), interior, LossConfig())
    assert gradient_error(binding, model.pack()) < 1e-5


# -- loss terms and constraints -----------------------------------------------


def test_loss_terms_add_up():
    model = small_model()
    points, targets = _data()
    bundle = model.design(points)
    result = regression_loss(model, points, targets, bundle, LossConfig(preconditioned=False))
    residual = model.predict(points, bundle) - targets
    assert result.terms["data"] == pytest.approx(np.mean(residual**2), rel=1e-12)
    assert result.loss == pytest.approx(sum(result.terms.values()), rel=1e-12)


def test_none_disables_l1_and_penalty():
    model = small_model()
    points, targets = _data()
    bundle = model.design(points)
    cfg = LossConfig(lambda_r=1.0, lambda_c=1.0, constraint=ConstraintKind.NONE, preconditioned=False)
    result = regression_loss(model, points, targets, bundle, cfg)
    assert cfg.effective_lambda_r == 0.0
    assert result.terms["l1"] == 0.0 and result.terms["constraint"] == 0.0
    assert result.loss == result.terms["data"]


def test_l1_only_has_no_penalty():
    model = small_model()
    points, targets = _data()
    bundle = model.design(points)
    cfg = LossConfig(lambda_r=1e-2, constraint=ConstraintKind.L1_ONLY, preconditioned=False)
    result = regression_loss(model, points, targets, bundle, cfg)
    theta = model.pack()
    assert result.terms["constraint"] == 0.0
    assert result.terms["l1"] == pytest.approx(1e-2 * np.abs(theta).sum())


def test_constraint_norms_match_definitions():
    model = small_model()
    points, _ = _data()
    bundle = model.design(points)
    ev = model.features(points)
    psi, a, b = ev.features, model.mlp.coeffs, model.poly_coeffs
    N, P = psi @ a, bundle.phi @ b

    ca = constraint_penalty(model, points, bundle, ConstraintKind.CA).norm
    ce = constraint_penalty(model, points, bundle, ConstraintKind.CE).norm
    cg = constraint_penalty(model, points, bundle, ConstraintKind.CG).norm
    ch = constraint_penalty(model, points, bundle, ConstraintKind.CH).norm
    assert ca == pytest.approx(np.linalg.norm(N * P))
    assert ce == pytest.approx(np.linalg.norm(P[:, None] * psi * a))
    assert cg == pytest.approx(np.linalg.norm(np.outer(P, a)))
    full = (psi * a)[:, :, None] * (bundle.phi * b)[:, None, :]
    assert ch == pytest.approx(np.sqrt(np.sum(full**2)))


def test_zero_polynomial_part_gives_zero_penalty():
    model = small_model()
    model.poly_coeffs[:] = 0.0
    points, _ = _data()
    result = constraint_penalty(model, points, model.design(points), ConstraintKind.CE)
    assert result.norm == 0.0
    assert not result.grad_a.any() and not result.grad_b.any()


# -- prediction, truncation, packing ------------------------------------------


def test_polynomial_layer_equivalence():
    basis = enumerate_indices(BasisSpec(BasisKind.TOTAL_DEGREE, 2, 5))
    model = PannModel.create(MlpConfig(2, ()), basis, seed=1)
    model.poly_coeffs[:] = np.random.default_rng(4).normal(size=basis.cardinality)
    points, _ = _data(64)
    bundle = assemble_design(basis, points)
    assert np.array_equal(model.predict(points, bundle), bundle.phi @ model.poly_coeffs)


def test_network_only_model():
    model = PannModel.create(MlpConfig(2, (4,)), None, seed=2)
    points, _ = _data()
    assert np.allclose(model.evaluate(points), model.features(points).nn_values)
    assert model.n_basis == 0


def test_evaluate_matches_predict_in_batches():
    model = small_model()
    points, _ = _data(50)
    assert np.allclose(model.evaluate(points, batch_size=7), model.predict(points, model.design(points)))


def test_stale_bundle_rejected():
    model = small_model(degree=3)
    points, _ = _data()
    other = enumerate_indices(BasisSpec(BasisKind.TOTAL_DEGREE, 2, 4))
    with pytest.raises(ConfigurationError):
        model.predict(points, assemble_design(other, points))


def test_truncation_masks_small_coefficients():
    model = small_model(widths=(6,), degree=2)
    model.mlp.coeffs[:] = [1.0, 1e-5, -0.5, -2e-5, 0.2, 0.0]
    model.poly_coeffs[:] = [0.3, 5e-5, 1.0, 0.0, -1e-3, 2.0]
    report = model.truncate(1e-4)

    assert report.pct_nn_truncated == pytest.approx(50.0)
    assert report.pct_poly_truncated == pytest.approx(100.0 * 2 / 6)
    assert report.as_label() == "50.0/33.3"
    assert report.surviving_poly_indices == [(0, 0), (1, 0), (1, 1), (2, 0)]
    assert model.mlp.coeffs[1] == 0.0 and model.poly_coeffs[1] == 0.0


def test_truncation_is_irreversible():
    model = small_model(widths=(6,), degree=2)
    model.mlp.coeffs[0] = 1e-6
    model.truncate(1e-4)
    size = model.pack().size
    model.unpack(np.full(size, 5.0))
    assert model.mlp.coeffs[0] == 0.0
    model.truncate(0.0)
    assert not model.mlp.mask[0]


def test_pack_unpack_round_trip():
    model = small_model()
    theta = model.pack()
    clone = model.copy()
    clone.unpack(np.zeros_like(theta))
    clone.unpack(theta)
    assert np.array_equal(clone.pack(), theta)
    assert clone.n_free == theta.size
    with pytest.raises(ConfigurationError):
        clone.unpack(theta[:-1])


def test_unpack_rejects_wrong_length_without_writing():
    model = small_model()
    theta = model.pack()
    weights = [W.copy() for W in model.mlp.weights]
    for bad in (np.zeros(theta.size - 1), np.zeros(theta.size + 3)):
        with pytest.raises(ConfigurationError, match="expected"):
            model.unpack(bad)
    assert all(np.array_equal(W, W0) for W, W0 in zip(model.mlp.weights, weights))
    assert np.array_equal(model.pack(), theta)


def test_negative_threshold_rejected():
    with pytest.raises(ConfigurationError):
        small_model().truncate(-1.0)


# -- checkpoints --------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    model = small_model(ActivationKind.REPU)
    model.truncate(0.2)
    path = save_checkpoint(model, tmp_path / "models" / "pann.json")
    restored = load_checkpoint(path)
    points, _ = _data()
    assert np.array_equal(restored.evaluate(points), model.evaluate(points))
    assert restored.truncation_report() == model.truncation_report()
    assert restored.mlp_config.activation == Activation(ActivationKind.REPU)


def test_checkpoint_errors(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "missing.json")

    garbled = tmp_path / "garbled.json"
    garbled.write_text("{not json")
    with pytest.raises(DataError):
        load_checkpoint(garbled)

    path = save_checkpoint(small_model(), tmp_path / "ok.json")
    record = json.loads(path.read_text())
    record["format_version"] = 99
    path.write_text(json.dumps(record))
    with pytest.raises(DataError):
        load_checkpoint(path)

    record["format_version"] = 1
    del record["mlp"]
    path.write_text(json.dumps(record))
    with pytest.raises(DataError):
        load_checkpoint(path)


# -- closed-form cases --------------------------------------------------------


def _polynomial_only(degree=20):
    basis = enumerate_indices(BasisSpec(BasisKind.TOTAL_DEGREE, 2, degree))
    model = PannModel.create(MlpConfig(2, (4,)), basis, seed=0)
    model.mlp.coeffs[:] = 0.0
    return model


def test_unit_coefficient_reproduces_legendre_product():
    model = _polynomial_only()
    model.poly_coeffs[model.basis.position((10, 10))] = 1.0
    samples = np.array([[1.0, 1.0], [0.3, -0.7], [-0.95, 0.1]])
    expected = manufactured_poisson().exact_solution(samples)
    assert model.evaluate(samples)[0] == pytest.approx(1.0)
    assert np.allclose(model.evaluate(samples), expected, atol=1e-14)


def test_exact_poisson_solution_has_zero_loss():
    model = _polynomial_only()
    model.poly_coeffs[model.basis.position((10, 10))] = 1.0
    interior = np.random.default_rng(1).uniform(-1, 1, size=(40, 2))
    cfg = LossConfig(lambda_r=0.0, lambda_c=0.0, preconditioned=False)
    binding = pde_binding(model, manufactured_poisson(), _edge(), interior, cfg)
    loss, _ = binding(model.pack())
    assert loss <= 1e-18


def test_zero_model_regression_loss_is_mean_square_target():
    model = _polynomial_only(degree=2)
    points, targets = _data()
    cfg = LossConfig(lambda_r=0.0, lambda_c=0.0, preconditioned=False)
    result = regression_loss(model, points, targets, model.design(points), cfg)
    assert result.loss == pytest.approx(np.mean(targets**2))


def test_single_entry_constraints():
    basis = enumerate_indices(BasisSpec(BasisKind.TOTAL_DEGREE, 1, 0))
    model = PannModel.create(MlpConfig(1, (1,)), basis, seed=0)
    model.mlp.weights[0][:] = 0.0
    model.mlp.biases[0][:] = np.arctanh(0.5)
    model.mlp.coeffs[:] = 2.0
    model.poly_coeffs[:] = 1.0
    point = np.array([[0.2]])
    bundle = model.design(point)
    # psi = 0.5, a = 2, phi = 1, b = 1, so N = P = 1
    assert constraint_penalty(model, point, bundle, ConstraintKind.CH).norm == pytest.approx(1.0)
    assert constraint_penalty(model, point, bundle, ConstraintKind.CA).norm == pytest.approx(1.0)
    assert constraint_penalty(model, point, bundle, ConstraintKind.CG).norm == pytest.approx(2.0)
    assert constraint_penalty(model, point, bundle, ConstraintKind.NONE).norm == 0.0
