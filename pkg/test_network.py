"""
Network Tests
Activation derivatives, forward Laplacians/gradients and exact parameter
gradients of the hidden stack.
"""

import numpy as np
import pytest

from src.errors import ConfigurationError, InternalError
from src.evaluation.invariants import fd_laplacian, relative_gap
from src.network import (
    Activation,
    ActivationKind,
    MlpConfig,
    Upstream,
    backward_params,
    forward_features,
    init_params,
)


def _network(kind=ActivationKind.TANH, widths=(4, 3), dim=2, seed=3):
    config = MlpConfig(dim, widths, Activation(kind))
    params = init_params(config, seed)
    rng = np.random.default_rng(seed)
    params.biases = [rng.normal(0.0, 0.3, size=b.shape) for b in params.biases]
    return config, params


def _points(n=12, dim=2, seed=0):
    return np.random.default_rng(seed).uniform(-0.9, 0.9, size=(n, dim))


def _flat(params):
    return np.concatenate(
        [w.ravel() for w in params.weights] + [b.ravel() for b in params.biases] + [params.coeffs]
    )


def _assign(params, theta):
    offset = 0
    for group in (params.weights, params.biases):
        for i, array in enumerate(group):
            group[i] = theta[offset: offset + array.size].reshape(array.shape)
            offset += array.size
    params.coeffs = theta[offset: offset + params.coeffs.size].copy()


def _flat_gradient(grad):
    return np.concatenate(
        [w.ravel() for w in grad.weights] + [b.ravel() for b in grad.biases] + [grad.coeffs]
    )


@pytest.mark.parametrize("kind", [ActivationKind.TANH, ActivationKind.REPU])
def test_activation_derivatives(kind):
    activation = Activation(kind, repu_power=4)
    z = np.array([-1.3, -0.4, 0.2, 0.7, 1.6])
    h = 1e-5
    for order in range(3):
        plus = activation.derivatives(z + h, 3)[order]
        minus = activation.derivatives(z - h, 3)[order]
        exact = activation.derivatives(z, 3)[order + 1]
        assert np.allclose(exact, (plus - minus) / (2 * h), atol=1e-6)


def test_relu_higher_derivatives_vanish():
    values = Activation(ActivationKind.RELU).derivatives(np.array([-1.0, 2.0]), 3)
    assert np.allclose(values[0], [0.0, 2.0])
    assert np.allclose(values[1], [0.0, 1.0])
    assert not values[2].any() and not values[3].any()


def test_repu_power_below_two_rejected():
    with pytest.raises(ConfigurationError):
        Activation(ActivationKind.REPU, repu_power=1)


@pytest.mark.parametrize("kind", [ActivationKind.TANH, ActivationKind.REPU])
def test_laplacian_matches_finite_differences(kind):
    config, params = _network(kind)
    points = _points()
    result = forward_features(params, config, points, need_laplacian=True)

    def network(x):
        return forward_features(params, config, x).nn_values

    assert relative_gap(result.nn_laplacian, fd_laplacian(network, points)) < 1e-5
    assert np.allclose(result.nn_laplacian, result.feature_laplacians @ params.coeffs)


def test_feature_gradients_match_finite_differences():
    config, params = _network(widths=(5,))
    points = _points()
    grads = forward_features(params, config, points, need_gradient=True).feature_grads
    h = 1e-6
    for j in range(2):
        shift = np.zeros(2)
        shift[j] = h
        plus = forward_features(params, config, points + shift).features
        minus = forward_features(params, config, points - shift).features
        assert np.allclose(grads[:, :, j], (plus - minus) / (2 * h), atol=1e-8)


@pytest.mark.parametrize("with_laplacian", [False, True])
@pytest.mark.parametrize("kind", [ActivationKind.TANH, ActivationKind.REPU])
def test_backward_matches_finite_differences(kind, with_laplacian):
    config, params = _network(kind)
    points = _points()
    rng = np.random.default_rng(9)
    c_values = rng.normal(size=len(points))
    c_laplacian = rng.normal(size=len(points))

    def loss(theta):
        trial = params.copy()
        _assign(trial, theta)
        ev = forward_features(trial, config, points, need_laplacian=with_laplacian)
        value = c_values @ ev.nn_values
        if with_laplacian:
            value += c_laplacian @ ev.nn_laplacian
        return value, ev, trial

    theta = _flat(params)
    _, ev, trial = loss(theta)
    upstream = Upstream(d_values=c_values, d_laplacian=c_laplacian if with_laplacian else None)
    analytic = _flat_gradient(backward_params(trial, ev, upstream))

    eps = 1e-6
    numeric = np.zeros_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = eps
        numeric[i] = (loss(theta + step)[0] - loss(theta - step)[0]) / (2 * eps)
    assert relative_gap(analytic, numeric) < 1e-6


@pytest.mark.parametrize("kind", [ActivationKind.TANH, ActivationKind.REPU])
def test_feature_upstream_matches_finite_differences(kind):
    config, params = _network(kind)
    points = _points()
    rng = np.random.default_rng(21)
    c_features = rng.normal(size=(len(points), config.width))
    c_laplacians = rng.normal(size=(len(points), config.width))

    def loss(theta):
        trial = params.copy()
        _assign(trial, theta)
        ev = forward_features(trial, config, points, need_laplacian=True)
        return float((c_features * ev.features).sum() + (c_laplacians * ev.feature_laplacians).sum()), ev, trial

    theta = _flat(params)
    _, ev, trial = loss(theta)
    upstream = Upstream(d_features=c_features, d_feature_laplacians=c_laplacians)
    analytic = _flat_gradient(backward_params(trial, ev, upstream))

    eps = 1e-6
    numeric = np.zeros_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = eps
        numeric[i] = (loss(theta + step)[0] - loss(theta - step)[0]) / (2 * eps)
    assert relative_gap(analytic, numeric) < 1e-6
    # features do not depend on the output coefficients
    assert not analytic[-config.width:].any()


def test_masked_coefficients_get_zero_gradient():
    config, params = _network()
    params.mask[1] = False
    points = _points()
    ev = forward_features(params, config, points, need_laplacian=True)
    assert np.allclose(ev.nn_values, ev.features @ np.where(params.mask, params.coeffs, 0.0))
    grad = backward_params(params, ev, Upstream(d_values=np.ones(len(points)), d_laplacian=np.ones(len(points))))
    assert grad.coeffs[1] == 0.0
    assert grad.coeffs[0] != 0.0


def test_empty_network_outputs_zero():
    config = MlpConfig(2, ())
    params = init_params(config, 0)
    ev = forward_features(params, config, _points(), need_laplacian=True)
    assert ev.features.shape == (12, 0)
    assert not ev.nn_values.any() and not ev.nn_laplacian.any()
    grad = backward_params(params, ev, Upstream(d_values=np.ones(12)))
    assert grad.weights == [] and grad.coeffs.size == 0


def test_laplacian_upstream_needs_laplacian_pass():
    config, params = _network()
    ev = forward_features(params, config, _points())
    with pytest.raises(InternalError):
        backward_params(params, ev, Upstream(d_laplacian=np.ones(12)))


def test_dimension_mismatch():
    config, params = _network()
    with pytest.raises(ConfigurationError):
        forward_features(params, config, np.zeros((3, 3)))


def test_init_is_seeded():
    config = MlpConfig(2, (8, 8))
    a, b = init_params(config, 11), init_params(config, 11)
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
    assert np.array_equal(a.coeffs, b.coeffs)
    assert not any(bias.any() for bias in a.biases)
