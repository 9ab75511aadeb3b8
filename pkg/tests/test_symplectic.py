import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from magnomech.errors import ContractError
from magnomech.symplectic import (
    MagneticField,
    OneFormSection,
    canonical_matrix,
    closedness_residual,
    exterior_derivative_matrix,
    pullback_identity_residuals,
    omega_B,
    pullback_matrix,
    skewness_residual,
    split,
    symplectic_matrix,
)

from conftest import maxabs

vec = lambda n: arrays(float, n, elements=st.floats(-2, 2, allow_nan=False))


def skew(M):
    return M - M.T


def test_symplectic_matrix_layout():
    b = np.array([[0.0, 2.0], [-2.0, 0.0]])
    S = symplectic_matrix(b)
    expected = np.array([[0, -2, 1, 0], [2, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]], float)
    assert np.array_equal(S, expected)
    assert np.array_equal(canonical_matrix(2), symplectic_matrix(np.zeros((2, 2))))


@given(vec(9), vec(6), vec(6))
def test_omega_B_is_skew_and_nondegenerate(bflat, v, w):
    beta = MagneticField.from_constant(skew(bflat.reshape(3, 3)))
    z = np.zeros(6)
    assert omega_B(beta, z, v, w) == pytest.approx(-omega_B(beta, z, w, v), abs=1e-12)
    assert abs(np.linalg.det(symplectic_matrix(beta(z[:3])))) == pytest.approx(1.0)


def test_omega_B_rejects_wrong_vector_length():
    beta = MagneticField.zero(2)
    with pytest.raises(ContractError):
        omega_B(beta, np.zeros(4), np.zeros(3), np.zeros(3))
    with pytest.raises(ContractError):
        split(np.zeros(3))


def test_force_coefficient_calibration():
    # The force convention and the pairing convention differ by one global sign.
    b = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.array_equal(MagneticField.from_force_coefficients(b).constant, -b)
    assert MagneticField.zero(3).is_zero and not MagneticField.from_constant(b).is_zero


def test_exterior_derivative_of_linear_primitive():
    beta = skew(np.arange(9.0).reshape(3, 3))
    gamma = OneFormSection(3, lambda q: 0.5 * beta @ q)
    A = exterior_derivative_matrix(gamma, np.array([0.3, -1.0, 2.0]))
    assert maxabs(A + beta) <= 1e-14


def test_exterior_derivative_of_shear_form():
    # gammabar = (q2, 0): d gamma pairs as [[0, -1], [1, 0]], so B = -d gamma is [[0, 1], [-1, 0]].
    gamma = OneFormSection(2, lambda q: np.array([q[1], 0 * q[0]]))
    A = exterior_derivative_matrix(gamma, np.array([0.7, 0.2]))
    assert np.array_equal(A, np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_closedness_detects_non_closed_field():
    closed = MagneticField(3, lambda q: np.array([[0, 2 * q[0] - q[2], q[1] * q[2] - q[1]], [q[2] - 2 * q[0], 0, q[0] * q[2]], [q[1] - q[1] * q[2], -q[0] * q[2], 0]]))
    open_ = MagneticField(3, lambda q: np.array([[0, q[2], 0 * q[0]], [-q[2], 0, q[0]], [0 * q[0], -q[0], 0]]))
    q = np.array([0.3, -0.8, 1.1])
    assert closedness_residual(closed, q) <= 1e-14
    assert closedness_residual(open_, q) == pytest.approx(2.0)
    assert skewness_residual(closed, q) == 0.0


@given(vec(2), vec(4), vec(4), vec(4))
def test_pullback_identities_on_arbitrary_section_and_field(qc, z, v, w):
    # Both identities hold for any section and any closed field, not only for solutions.
    beta = MagneticField(2, lambda q: np.array([[0 * q[0], np.sin(q[0]) + q[1] ** 2], [-np.sin(q[0]) - q[1] ** 2, 0 * q[0]]]))
    gamma = OneFormSection(2, lambda q: np.array([np.cos(q[1]) * q[0] + qc[0], q[0] ** 3 - qc[1] * q[1]]))
    r1, r2 = pullback_identity_residuals(gamma, beta, z, v, w)
    assert r1 <= 1e-8 and r2 <= 1e-8


def test_pullback_of_fiber_projection_is_degenerate():
    # lambda = gamma o pi has rank n, so its pullback of omega_B has rank at most n.
    beta = MagneticField.from_constant([[0, 1.0], [-1.0, 0]])
    gamma = OneFormSection(2, lambda q: np.array([q[1] ** 2, q[0]]))
    P = pullback_matrix(gamma.fiber_projection, beta, np.array([0.1, 0.2, 0.3, 0.4]))
    assert np.linalg.matrix_rank(P, tol=1e-10) <= 2
    assert maxabs(P[2:, :]) == 0.0 and maxabs(P[:, 2:]) == 0.0


def test_one_form_section_api():
    gamma = OneFormSection(2, lambda q: 2 * q)
    q = np.array([1.0, -1.0])
    assert np.array_equal(gamma(q), [1, -1, 2, -2])
    assert np.array_equal(gamma.momentum(q), [2, -2])
    assert np.array_equal(gamma.fiber_projection(np.array([1.0, -1.0, 9, 9])), [1, -1, 2, -2])
