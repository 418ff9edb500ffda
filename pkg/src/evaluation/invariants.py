"""
Invariant Suite
Finite-difference oracles and the numerical checks behind `main.py check`.

The same oracles back the pytest suites, so a passing `check` run and a
passing test run certify the same properties.
"""

from dataclasses import dataclass
from typing import Callable, List, Tuple
import logging

import numpy as np

from src.model import ConstraintKind, LossConfig, PannModel
from src.network import Activation, ActivationKind, MlpConfig
from src.optim import LbfgsConfig, lbfgs_run, pde_binding, regression_binding
from src.pde import gauss_legendre_rule, manufactured_allen_cahn, manufactured_poisson
from src.polybasis import (
    BasisKind,
    BasisSpec,
    assemble_design,
    compute_preconditioner,
    enumerate_indices,
    legendre_derivs_1d,
    legendre_values_1d,
)


logger = logging.getLogger("evaluation.invariants")


# -- oracles ------------------------------------------------------------------


def fd_gradient(
    loss_fn: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    theta: np.ndarray,
    eps: float = 1e-6,
) -> np.ndarray:
    """Central-difference gradient of loss_fn at theta."""
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = eps
        f_plus, _ = loss_fn(theta + step)
        f_minus, _ = loss_fn(theta - step)
        grad[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def gradient_error(
    loss_fn: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    theta: np.ndarray,
    eps: float = 1e-6,
) -> float:
    """||g - g_fd|| / ||g_fd|| for the analytic gradient g returned by loss_fn."""
    _, analytic = loss_fn(theta)
    numeric = fd_gradient(loss_fn, theta, eps)
    scale = max(float(np.linalg.norm(numeric)), 1e-30)
    return float(np.linalg.norm(analytic - numeric)) / scale


def fd_laplacian(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Second-difference Laplacian of a pointwise function."""
    points = np.atleast_2d(points)
    center = fn(points)
    total = np.zeros(len(points))
    for j in range(points.shape[1]):
        shift = np.zeros(points.shape[1])
        shift[j] = h
        total += (fn(points + shift) - 2.0 * center + fn(points - shift)) / (h * h)
    return total


def relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(b)), 1e-30)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / scale


def legendre10_closed_form(z: np.ndarray) -> np.ndarray:
    return (
        46189 * z**10 - 109395 * z**8 + 90090 * z**6 - 30030 * z**4 + 3465 * z**2 - 63
    ) / 256.0


def small_model(
    activation: ActivationKind = ActivationKind.TANH,
    widths: Tuple[int, ...] = (6, 5),
    degree: int = 3,
    seed: int = 7,
) -> PannModel:
    """A small randomized 2-D PANN with every coefficient nonzero."""
    basis = enumerate_indices(BasisSpec(BasisKind.TOTAL_DEGREE, 2, degree))
    model = PannModel.create(MlpConfig(2, widths, Activation(activation)), basis, seed)
    rng = np.random.default_rng(seed + 1)
    model.unpack(rng.normal(0.0, 0.5, size=model.pack().size))
    return model


# -- checks -------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: str = ""


def check_cardinalities() -> CheckResult:
    expected = {
        (BasisKind.TOTAL_DEGREE, 2): 45,
        (BasisKind.TOTAL_DEGREE, 5): 1287,
        (BasisKind.TENSOR_PRODUCT, 3): 729,
        (BasisKind.HYPERBOLIC_CROSS, 2): 23,
        (BasisKind.HYPERBOLIC_CROSS, 3): 44,
        (BasisKind.HYPERBOLIC_CROSS, 4): 73,
        (BasisKind.HYPERBOLIC_CROSS, 5): 111,
    }
    wrong = []
    for (kind, d), m in expected.items():
        got = enumerate_indices(BasisSpec(kind, d, 8)).cardinality
        if got != m:
            wrong.append(f"{kind.value} d={d}: {got} != {m}")
    return CheckResult("Index-set cardinalities at degree 8", not wrong, "; ".join(wrong))


def check_legendre_recurrence() -> CheckResult:
    z = np.linspace(-1.0, 1.0, 1000)
    values = legendre_values_1d(10, z)
    gap = float(np.max(np.abs(values[:, 10] - legendre10_closed_form(z))))
    ones = np.allclose(legendre_values_1d(12, 1.0), 1.0, atol=1e-14)
    return CheckResult(
        "Legendre recurrence vs closed form", gap < 1e-12 and ones, f"max |diff| = {gap:.2e}"
    )


def check_legendre_derivatives() -> CheckResult:
    z = np.linspace(-0.95, 0.95, 41)
    h = 1e-5
    values, first, second = legendre_derivs_1d(8, z)
    plus = legendre_values_1d(8, z + h)
    minus = legendre_values_1d(8, z - h)
    fd_first = (plus - minus) / (2 * h)
    fd_second = (plus - 2 * values + minus) / (h * h)
    e1 = relative_gap(first, fd_first)
    e2 = relative_gap(second, fd_second)
    return CheckResult(
        "Legendre derivative recurrences vs finite differences",
        e1 < 1e-8 and e2 < 1e-5,
        f"first {e1:.2e}, second {e2:.2e}",
    )


def check_quadrature() -> CheckResult:
    worst = 0.0
    for n in range(1, 13):
        rule = gauss_legendre_rule(n, 1)
        z = rule.nodes[:, 0]
        for k in range(2 * n):
            exact = 2.0 / (k + 1) if k % 2 == 0 else 0.0
            worst = max(worst, abs(rule.integrate(z**k) - exact))
    rule2 = gauss_legendre_rule(5, 2)
    volume = abs(rule2.weights.sum() - 4.0)
    return CheckResult(
        "Gauss-Legendre exactness (degree <= 2n-1)",
        worst <= 1e-12 and volume <= 1e-12,
        f"worst error {worst:.2e}",
    )


def check_preconditioner() -> CheckResult:
    basis = enumerate_indices(BasisSpec(BasisKind.TOTAL_DEGREE, 2, 6))
    points = np.random.default_rng(3).uniform(-1, 1, size=(200, 2))
    bundle = compute_preconditioner(assemble_design(basis, points), basis)
    scaled = bundle.precond[:, None] * bundle.phi
    energy = (scaled**2).sum(axis=1)
    gap = float(np.max(np.abs(energy - basis.cardinality)))
    return CheckResult("Preconditioned rows have energy m", gap < 1e-9, f"max |diff| = {gap:.2e}")


def check_regression_gradient() -> CheckResult:
    errors = []
    for kind in (ConstraintKind.CE, ConstraintKind.CA, ConstraintKind.CH, ConstraintKind.L1_ONLY):
        model = small_model()
        points = np.random.default_rng(11).uniform(-1, 1, size=(30, 2))
        targets = np.sin(points[:, 0]) * points[:, 1]
        cfg = LossConfig(lambda_r=1e-3, lambda_c=1e-2, constraint=kind)
        binding = regression_binding(model, points, targets, cfg)
        errors.append((kind.value, gradient_error(binding, model.pack())))
    worst = max(e for _, e in errors)
    return CheckResult(
        "Regression loss gradient vs finite differences",
        worst < 1e-5,
        ", ".join(f"{k}: {e:.1e}" for k, e in errors),
    )


def check_pde_gradient() -> CheckResult:
    problem = manufactured_allen_cahn()
    model = small_model(widths=(5, 4))
    rng = np.random.default_rng(5)
    interior = rng.uniform(-1, 1, size=(20, 2))
    edge = np.array([[-1.0, 0.3], [1.0, -0.2], [0.5, 1.0], [-0.4, -1.0]])
    cfg = LossConfig(lambda_r=1e-4, lambda_c=1e-2, constraint=ConstraintKind.CE)
    binding = pde_binding(model, problem, edge, interior, cfg)
    err = gradient_error(binding, model.pack())
    return CheckResult("Allen-Cahn loss gradient vs finite differences", err < 1e-5, f"relative error {err:.1e}")


def check_network_laplacian() -> CheckResult:
    model = small_model(widths=(6, 6))
    points = np.random.default_rng(2).uniform(-0.9, 0.9, size=(25, 2))
    analytic = model.features(points, need_laplacian=True).nn_laplacian
    numeric = fd_laplacian(lambda x: model.features(x).nn_values, points)
    err = relative_gap(analytic, numeric)
    return CheckResult("Network Laplacian vs finite differences", err < 1e-5, f"relative error {err:.1e}")


def check_manufactured_solutions() -> CheckResult:
    points = np.random.default_rng(9).uniform(-0.99, 0.99, size=(1000, 2))
    details, passed = [], True
    for name, problem in (("poisson", manufactured_poisson()), ("allen-cahn", manufactured_allen_cahn())):
        u = problem.exact_solution(points)
        residual = problem.residual(points, u, problem.laplacian(points))
        fd_err = relative_gap(fd_laplacian(problem.exact_solution, points[:50]), problem.laplacian(points[:50]))
        ok = float(np.max(np.abs(residual))) <= 1e-10 and fd_err < 1e-5
        passed = passed and ok
        details.append(f"{name}: FD Laplacian {fd_err:.1e}")
    corner = np.array([[1.0, 1.0]])
    poisson_corner = float(manufactured_poisson().forcing(corner)[0])
    passed = passed and abs(poisson_corner - 2970.0) < 1e-9
    return CheckResult("Manufactured solutions are consistent", passed, "; ".join(details))


def check_lbfgs_quadratic() -> CheckResult:
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    A = Q @ np.diag([1.0, 2.0, 5.0, 10.0, 20.0]) @ Q.T
    x, report = lbfgs_run(lambda t: (0.5 * float(t @ A @ t), A @ t), np.ones(5), LbfgsConfig(iterations=50))
    g = float(np.linalg.norm(A @ x))
    return CheckResult("L-BFGS on a 5-D quadratic", g < 1e-10, f"|g| = {g:.1e} after {report.iterations} iterations")


def check_polynomial_layer_equivalence() -> CheckResult:
    basis = enumerate_indices(BasisSpec(BasisKind.TOTAL_DEGREE, 2, 5))
    model = PannModel.create(MlpConfig(2, ()), basis, seed=1)
    model.poly_coeffs[:] = np.random.default_rng(4).normal(size=basis.cardinality)
    points = np.random.default_rng(6).uniform(-1, 1, size=(64, 2))
    bundle = assemble_design(basis, points)
    same = np.array_equal(model.predict(points, bundle), bundle.phi @ model.poly_coeffs)
    return CheckResult("Width-0 PANN equals the polynomial layer", same)


CHECKS: List[Callable[[], CheckResult]] = [
    check_cardinalities,
    check_legendre_recurrence,
    check_legendre_derivatives,
    check_quadrature,
    check_preconditioner,
    check_network_laplacian,
    check_regression_gradient,
    check_pde_gradient,
    check_manufactured_solutions,
    check_lbfgs_quadratic,
    check_polynomial_layer_equivalence,
]


def print_section(title):
    """Print a formatted section header."""
    print("\n" + "=" * 70)
    print(f"  {title}")
    print("=" * 70 + "\n")


def print_result(test_name, passed, details=""):
    """Print test result."""
    status = "PASS" if passed else "FAIL"
    print(f"{status} - {test_name}")
    if details:
        print(f"    {details}")


def run_check_suite(verbose: bool = True) -> List[CheckResult]:
    """Run every check; exceptions count as failures."""
    if verbose:
        print_section("INVARIANT CHECKS")
    results = []
    for check in CHECKS:
        try:
            result = check()
        except Exception as e:
            logger.exception(f"Check {check.__name__} raised")
            result = CheckResult(check.__name__, False, f"raised {type(e).__name__}: {e}")
        results.append(result)
        if verbose:
            print_result(result.name, result.passed, result.details)
    if verbose:
        passed = sum(r.passed for r in results)
        print(f"\n{passed}/{len(results)} checks passed")
    return results
