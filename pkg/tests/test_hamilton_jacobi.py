import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad

from magnomech.dynamics import CmhSystem, FiberMap, flow_map, magnetic_vf
from magnomech.hamilton_jacobi import (
    compensating_magnetic_field,
    dgamma_plus_B_residual,
    hj1_identity_residual,
    hj1_residual,
    hj2_residuals,
    identity_map,
    symplectic_matrix_residual,
    symplectic_residual,
)
from magnomech.symplectic import MagneticField, OneFormSection, closedness_residual

from conftest import maxabs

vec = lambda n: arrays(float, n, elements=st.floats(-2, 2, allow_nan=False))
BETA2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def energy_compatible(gamma, E=1.0):
    """H = 1/2 |p|^2 + E - 1/2 |gammabar|^2, so H o gamma = E everywhere."""
    return lambda z: 0.5 * (z[gamma.n :] @ z[gamma.n :]) + E - 0.5 * (gamma.gammabar(z[: gamma.n]) @ gamma.gammabar(z[: gamma.n]))


# Five one-forms that are not closed, with their hand-computed d gamma pairing at q = (0.3, -0.4, 0.5).
NON_CLOSED = [
    OneFormSection(3, lambda q: np.array([q[1], 0 * q[0], 0 * q[0]])),
    OneFormSection(3, lambda q: np.array([q[1] ** 2, q[0] * q[2], np.sin(q[0])])),
    OneFormSection(3, lambda q: np.array([np.exp(q[2]), q[0] ** 3, q[1] * q[0]])),
    OneFormSection(3, lambda q: np.array([q[1] * q[2], -q[0] * q[2], q[0] * q[1] * q[2]])),
    OneFormSection(3, lambda q: np.array([np.cos(q[1]), np.sin(q[2]), q[0] ** 2 + q[1]])),
]


@given(vec(2), vec(3))
def test_type1_identity_for_arbitrary_sections(q, c):
    # r_q = 0 and r_p = grad(H o gamma) - (A + beta) H_p for every section.
    gamma = OneFormSection(2, lambda x: np.array([c[0] * x[1] ** 2 + np.sin(x[0]), c[1] * x[0] * x[1] + c[2]]))
    beta = MagneticField(2, lambda x: np.array([[0 * x[0], x[0] - x[1]], [x[1] - x[0], 0 * x[0]]]))
    H = lambda z: 0.5 * z[2] ** 2 + z[3] ** 2 * (1 + 0.1 * z[0] ** 2) + np.cos(z[1])
    force = FiberMap(2, lambda z: np.array([z[2] * z[0], -z[3]]))
    sys = CmhSystem(2, H, beta, force)
    assert hj1_identity_residual(gamma, sys, q) <= 1e-8
    assert maxabs(hj1_residual(gamma, sys, q)[:2]) <= 1e-12


@pytest.mark.parametrize("beta", [BETA2, np.array([[0, -0.5, 0.3], [0.5, 0, -0.8], [-0.3, 0.8, 0]])])
def test_linear_primitive_with_energy_compatible_H_solves_type1(beta, rng):
    n = beta.shape[0]
    gamma = OneFormSection(n, lambda q: 0.5 * beta @ q)
    sys = CmhSystem(n, energy_compatible(gamma), MagneticField.from_constant(beta))
    for q in rng.uniform(-2, 2, (100, n)):
        assert dgamma_plus_B_residual(gamma, sys.beta, q) <= 1e-14
        assert maxabs(hj1_residual(gamma, sys, q)) <= 1e-8


@pytest.mark.xfail(strict=True, reason="kinetic energy is not constant along a linear primitive; the Type I equation needs H o gamma locally constant")
def test_linear_primitive_with_kinetic_H_solves_type1(rng):
    gamma = OneFormSection(2, lambda q: 0.5 * BETA2 @ q)
    sys = CmhSystem(2, lambda z: 0.5 * z[2:] @ z[2:], MagneticField.from_constant(BETA2))
    assert max(maxabs(hj1_residual(gamma, sys, q)) for q in rng.uniform(-2, 2, (100, 2))) <= 1e-8


def test_linear_primitive_with_kinetic_H_residual_is_the_energy_gradient(rng):
    # With A + beta = 0 the residual p-block is exactly grad(1/2 |gammabar|^2) = beta.T beta q / 4.
    gamma = OneFormSection(2, lambda q: 0.5 * BETA2 @ q)
    sys = CmhSystem(2, lambda z: 0.5 * z[2:] @ z[2:], MagneticField.from_constant(BETA2))
    for q in rng.uniform(-2, 2, (10, 2)):
        assert maxabs(hj1_residual(gamma, sys, q)[2:] - 0.25 * q) <= 1e-14


def test_classical_stationary_solution_in_one_dimension(rng):
    # W(q) = int_0^q sqrt(2(E - V)), V = q^2 / 2, E = 1; gamma = dW.
    def W(q):
        return quad(lambda s: np.sqrt(2 * (1 - 0.5 * s * s)), 0.0, q, epsabs=1e-13)[0]

    h = 1e-5
    qs = rng.uniform(-0.9, 0.9, 50)
    gamma_exact = OneFormSection(1, lambda q: np.sqrt(2 - q**2))
    sys = CmhSystem(1, lambda z: 0.5 * z[1] ** 2 + 0.5 * z[0] ** 2, MagneticField.zero(1))
    for q in qs:
        # The quadrature-derived momentum agrees with the closed form.
        assert abs((W(q + h) - W(q - h)) / (2 * h) - np.sqrt(2 - q * q)) <= 1e-6
        assert maxabs(hj1_residual(gamma_exact, sys, np.array([q]))) <= 1e-6


def _shear_case():
    gamma = OneFormSection(2, lambda q: np.array([q[1], 0 * q[0]]))
    sys = CmhSystem(2, lambda z: 0.5 * z[2:] @ z[2:], MagneticField.zero(2))
    return gamma, sys


@pytest.mark.xfail(strict=True, reason="the shear section solves Type I: grad(H o gamma) = (0, q2) equals (d gamma) H_p")
def test_shear_section_fails_type1_at_generic_points(rng):
    gamma, sys = _shear_case()
    assert min(maxabs(hj1_residual(gamma, sys, q)) for q in rng.uniform(-2, 2, (20, 2))) > 1e-6


def test_shear_section_residual_vanishes_although_not_closed(rng):
    gamma, sys = _shear_case()
    for q in rng.uniform(-2, 2, (20, 2)):
        assert maxabs(hj1_residual(gamma, sys, q)) == 0.0
        assert dgamma_plus_B_residual(gamma, sys.beta, q) == 1.0


def test_any_horizontal_shear_section_solves_type1():
    # gammabar = (g(q2), 0): motion is along q1 with q2 fixed, so the residual vanishes.
    gamma = OneFormSection(2, lambda q: np.array([q[1] ** 2, 0 * q[0]]))
    sys = CmhSystem(2, lambda z: 0.5 * z[2:] @ z[2:], MagneticField.zero(2))
    r = hj1_residual(gamma, sys, np.array([0.4, 0.7]))
    assert maxabs(r) == 0.0


def test_non_solution_with_transverse_flow():
    gamma = OneFormSection(2, lambda q: np.array([q[1], q[0] ** 2]))
    sys = CmhSystem(2, lambda z: 0.5 * z[2:] @ z[2:], MagneticField.zero(2))
    q = np.array([0.4, 0.7])
    # r_p = grad(H o gamma) - A H_p, A = J.T - J with J = [[0, 1], [2 q1, 0]]
    J = np.array([[0, 1], [2 * q[0], 0]])
    A = J.T - J
    gb = np.array([q[1], q[0] ** 2])
    expected = np.concatenate([[0, 0], J.T @ gb - A @ gb])
    r = hj1_residual(gamma, sys, q)
    assert maxabs(r - expected) <= 1e-14 and maxabs(r) > 0.1


def test_necessity_fails_for_geodesic_unit_field(rng):
    # gammabar = (cos q3, sin q3, 0) solves Type I for H = |p|^2/2, beta = 0, though d gamma != 0.
    gamma = OneFormSection(3, lambda q: np.array([np.cos(q[2]), np.sin(q[2]), 0 * q[2]]))
    sys = CmhSystem(3, lambda z: 0.5 * z[3:] @ z[3:], MagneticField.zero(3))
    for q in rng.uniform(-2, 2, (20, 3)):
        assert maxabs(hj1_residual(gamma, sys, q)) <= 1e-14
        assert dgamma_plus_B_residual(gamma, sys.beta, q) > 0.01


def test_compensating_field_examples():
    shear = OneFormSection(2, lambda q: np.array([q[1], 0 * q[0]]))
    beta = compensating_magnetic_field(shear)
    assert np.array_equal(beta(np.array([0.3, 0.9])), [[0, 1], [-1, 0]])
    square = OneFormSection(2, lambda q: np.array([q[1] ** 2, 0 * q[0]]))
    assert np.array_equal(compensating_magnetic_field(square)(np.array([1.0, 3.0])), [[0, 6], [-6, 0]])
    closed = OneFormSection(2, lambda q: np.array([2 * q[0] * q[1], q[0] ** 2]))
    assert maxabs(compensating_magnetic_field(closed)(np.array([0.5, -1.5]))) == 0.0


@pytest.mark.parametrize("gamma", NON_CLOSED, ids=[f"form{i}" for i in range(5)])
def test_compensated_system_solves_type1(gamma, rng):
    beta = compensating_magnetic_field(gamma)
    sys = CmhSystem(3, energy_compatible(gamma), beta)
    for q in rng.uniform(-2, 2, (20, 3)):
        assert closedness_residual(beta, q) <= 1e-10
        assert dgamma_plus_B_residual(gamma, beta, q) <= 1e-14
        assert maxabs(hj1_residual(gamma, sys, q)) <= 1e-8


def test_symplectic_residual_examples(rng):
    beta0 = MagneticField.zero(1)
    scale = lambda z: np.array([z[0], 2 * z[1]])
    assert symplectic_residual(scale, beta0, np.zeros(2), [1, 0], [0, 1]) == pytest.approx(1.0)
    assert symplectic_residual(identity_map, beta0, np.zeros(2), [1, 0], [0, 1]) == 0.0
    lorentz = MagneticField.from_constant(BETA2)
    flow = flow_map(lambda z: magnetic_vf(lambda x: 0.5 * x[2:] @ x[2:], lorentz, z), 0.1, 100)
    for z in rng.uniform(-2, 2, (5, 4)):
        assert symplectic_matrix_residual(flow, lorentz, z) <= 1e-6


def test_canonical_flow_is_not_magnetic_symplectic(rng):
    lorentz = MagneticField.from_constant(BETA2)
    H = lambda x: 0.5 * x[2:] @ x[2:]
    canon = flow_map(lambda z: magnetic_vf(H, MagneticField.zero(2), z), 0.5, 50)
    assert symplectic_matrix_residual(canon, lorentz, np.array([0.1, 0.2, 1.0, -0.5])) > 0.1


@pytest.mark.parametrize("seed", range(4))
def test_type2_residuals_are_negatives_for_symplectic_maps(seed):
    # For symplectic eps: T eps X_{H o eps} = X_H o eps, so r2 = -r1 identically.
    rng = np.random.default_rng(seed)
    beta = MagneticField.from_constant(BETA2)
    H = lambda z: 0.5 * z[2:] @ z[2:] + 0.1 * z[0] ** 2 * z[1]
    sys = CmhSystem(2, H, beta, FiberMap(2, lambda z: np.array([0.2 * z[3], -z[0] * z[2]])))
    gamma = OneFormSection(2, lambda q: np.array([q[1] ** 2, np.sin(q[0])]))
    eps = flow_map(lambda z: magnetic_vf(H, beta, z), 0.1, 100)
    z = rng.uniform(-1, 1, 4)
    r1, r2 = hj2_residuals(gamma, eps, sys, z)
    assert maxabs(r1 + r2) <= 1e-8


def test_type2_classical_flow_invariance(rng):
    gamma = OneFormSection(1, lambda q: np.sqrt(2 - q**2))
    H = lambda z: 0.5 * z[1] ** 2 + 0.5 * z[0] ** 2
    sys = CmhSystem(1, H, MagneticField.zero(1))
    eps = flow_map(lambda z: magnetic_vf(H, sys.beta, z), 0.1, 100)
    for q in rng.uniform(-0.9, 0.9, (10, 1)):
        r1, r2 = hj2_residuals(gamma, eps, sys, gamma(q))
        assert maxabs(r1) <= 1e-6 and maxabs(r2) <= 1e-6


def test_type2_non_solution_fails_on_both_sides(rng):
    gamma = OneFormSection(2, lambda q: np.array([q[1], 0 * q[0]]))
    sys = CmhSystem(2, lambda z: 0.5 * z[2:] @ z[2:], MagneticField.zero(2))
    for z in rng.uniform(-2, 2, (10, 4)):
        r1, r2 = hj2_residuals(gamma, identity_map, sys, z)
        assert maxabs(r1) > 1e-3 and maxabs(r2) > 1e-3


@pytest.mark.xfail(strict=True, reason="identity map with a linear primitive and kinetic H: the Type I residual is the nonzero energy gradient")
def test_identity_map_with_linear_primitive_solves_type2(rng):
    gamma = OneFormSection(2, lambda q: 0.5 * BETA2 @ q)
    sys = CmhSystem(2, lambda z: 0.5 * z[2:] @ z[2:], MagneticField.from_constant(BETA2))
    for q in rng.uniform(-2, 2, (10, 2)):
        r1, r2 = hj2_residuals(gamma, identity_map, sys, gamma(q))
        assert maxabs(r1) <= 1e-6 and maxabs(r2) <= 1e-6
