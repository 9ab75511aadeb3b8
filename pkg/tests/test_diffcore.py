import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from magnomech import diffcore
from magnomech.diffcore import Dual, DerivativeEngine, ScalarField, VectorMap, primal
from magnomech.errors import ContractError, DegeneracyError, NumericDomainError

from conftest import DUAL, FD, maxabs

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def quad_form(Q, b):
    return lambda x: 0.5 * x @ Q @ x + b @ x


@given(arrays(float, (4, 4), elements=finite), arrays(float, 4, elements=finite), arrays(float, 4, elements=finite))
def test_dual_gradient_of_quadratic_is_exact(Q, b, x):
    g = DUAL.gradient(quad_form(Q, b), x)
    expected = 0.5 * (Q + Q.T) @ x + b
    assert maxabs(g - expected) <= 1e-12 * (1 + maxabs(expected))


@given(arrays(float, (3, 3), elements=finite), arrays(float, 3, elements=finite), arrays(float, 3, elements=finite))
def test_fd_gradient_of_quadratic_relative(Q, b, x):
    g = FD.gradient(quad_form(Q, b), x)
    expected = 0.5 * (Q + Q.T) @ x + b
    assert maxabs(g - expected) <= 1e-6 * (1 + maxabs(expected))


def test_hessian_of_quadratic_is_symmetric_part(rng):
    Q = rng.standard_normal((5, 5))
    H = DUAL.hessian(quad_form(Q, np.zeros(5)), rng.standard_normal(5))
    assert maxabs(H - 0.5 * (Q + Q.T)) == 0.0


def test_jacobian_of_linear_map(rng):
    M = rng.standard_normal((3, 4))
    for eng in (DUAL, FD):
        J = eng.jacobian(lambda x: M @ x, rng.standard_normal(4))
        assert maxabs(J - M) <= 1e-9


@pytest.mark.parametrize(
    "fn,deriv",
    [
        (np.sin, np.cos),
        (np.cos, lambda x: -np.sin(x)),
        (np.tan, lambda x: 1 / np.cos(x) ** 2),
        (np.exp, np.exp),
        (np.log, lambda x: 1 / x),
        (np.sqrt, lambda x: 0.5 / np.sqrt(x)),
        (np.arctan, lambda x: 1 / (1 + x * x)),
        (np.sinh, np.cosh),
        (np.cosh, np.sinh),
        (np.tanh, lambda x: 1 - np.tanh(x) ** 2),
        (lambda x: x**3, lambda x: 3 * x**2),
        (lambda x: 2.0**x, lambda x: np.log(2.0) * 2.0**x),
        (lambda x: x**x, lambda x: x**x * (np.log(x) + 1)),
        (lambda x: 1.0 / x, lambda x: -1 / x**2),
        (abs, np.sign),
    ],
)
def test_elementary_derivatives(fn, deriv):
    for x0 in (0.3, 0.9, 1.7):
        g = DUAL.gradient(lambda x: fn(x[0]), np.array([x0]))
        assert abs(g[0] - deriv(x0)) <= 1e-12 * (1 + abs(deriv(x0)))


def test_nested_duals_do_not_confuse_perturbations():
    # f(x) = x * d/dy (x * y) = x^2, so f'(3) = 6; tag confusion would give 2*3+3=9 or similar.
    def f(x):
        inner = DUAL.gradient(lambda y: x[0] * y[0], np.array([1.0]))
        return x[0] * inner[0]

    assert DUAL.gradient(f, np.array([3.0]))[0] == pytest.approx(6.0, abs=1e-14)


def test_second_derivative_by_nesting_matches_hessian():
    f = lambda x: np.sin(x[0]) * x[1] ** 2
    x = np.array([0.4, 1.3])
    H = DUAL.hessian(f, x)
    expected = np.array([[-np.sin(0.4) * 1.69, 2 * 1.3 * np.cos(0.4)], [2 * 1.3 * np.cos(0.4), 2 * np.sin(0.4)]])
    assert maxabs(H - expected) <= 1e-14


def test_dual_comparisons_use_primal():
    a, b = Dual(1.0, 1.0, 0), Dual(2.0, -5.0, 0)
    assert a < b and b > a and a <= 1.0 and float(b) == 2.0
    assert primal(np.array([a, b], dtype=object)).tolist() == [1.0, 2.0]


def test_arity_mismatch_is_contract_error():
    f = ScalarField(3, lambda x: x @ x)
    with pytest.raises(ContractError):
        DUAL.gradient(f, np.zeros(2))
    g = VectorMap(2, 3, lambda x: x)
    with pytest.raises(ContractError):
        DUAL.jacobian(g, np.zeros(2))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_derivative_raises():
    with pytest.raises(NumericDomainError):
        DUAL.gradient(lambda x: np.sqrt(x[0]), np.array([0.0]))
    with pytest.raises(NumericDomainError):
        FD.gradient(lambda x: np.log(x[0]), np.array([-1.0]))


def test_engine_selection_from_environment(monkeypatch):
    monkeypatch.setenv("MAGNOMECH_DERIV", "fd")
    assert diffcore.default_engine().mode == "fd"
    monkeypatch.setenv("MAGNOMECH_DERIV", "forward-dual")
    assert diffcore.default_engine().mode == "dual"
    monkeypatch.setenv("MAGNOMECH_DERIV", "symbolic")
    with pytest.raises(ContractError):
        diffcore.default_engine()
    with pytest.raises(ContractError):
        DerivativeEngine("reverse")


def test_object_solve_matches_lapack_and_differentiates(rng):
    A = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    b = rng.standard_normal(4)
    x_obj = diffcore.solve(A.astype(object), b.astype(object))
    assert maxabs(np.asarray(x_obj, float) - np.linalg.solve(A, b)) <= 1e-12
    # d/dt solve(A + t I, b) = -(A)^-1 (A)^-1 b at t = 0
    J = DUAL.jacobian(lambda t: diffcore.solve(A + t[0] * np.eye(4), b), np.array([0.0]))
    Ai = np.linalg.inv(A)
    assert maxabs(J[:, 0] + Ai @ Ai @ b) <= 1e-12


def test_solve_singular_raises():
    with pytest.raises(DegeneracyError):
        diffcore.solve(np.zeros((2, 2)), np.ones(2))
    with pytest.raises(DegeneracyError):
        diffcore.solve(np.zeros((2, 2), dtype=object), np.ones(2, dtype=object))


def test_subspace_tools(rng):
    A = rng.standard_normal((2, 5))
    N = diffcore.null_space(A)
    assert N.shape == (5, 3) and maxabs(A @ N) <= 1e-12 and maxabs(N.T @ N - np.eye(3)) <= 1e-12
    B1 = np.eye(4)[:, :3]
    B2 = np.eye(4)[:, 1:]
    inter = diffcore.subspace_intersect(B1, B2)
    assert inter.shape[1] == 2 and diffcore.same_span_residual(inter, np.eye(4)[:, 1:3]) <= 1e-12
    assert diffcore.numerical_rank(np.outer([1, 2], [3, 4])) == 1
    assert diffcore.orth(np.zeros((3, 2))).shape == (3, 0)
    assert diffcore.span_residual(B1, np.eye(4)[:, 3]) == 1.0


def test_saddle_solve(rng):
    K = rng.standard_normal((4, 4))
    K = K @ K.T + np.eye(4)
    C = rng.standard_normal((1, 4))
    rhs = rng.standard_normal(4)
    x, lam = diffcore.saddle_solve(K, C, rhs)
    assert maxabs(C @ x) <= 1e-12 and maxabs(K @ x + C.T @ lam - rhs) <= 1e-12
    with pytest.raises(DegeneracyError):
        diffcore.saddle_solve(np.zeros((2, 2)), np.zeros((1, 2)), np.ones(2))
