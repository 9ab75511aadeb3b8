"""Residuals for Hamilton-Jacobi equations of unconstrained CMH systems.

Type I concerns a one-form section gamma, Type II a symplectic phase map eps
together with gamma.  Everything returns raw residual vectors or scalars; the
pass/fail logic with tolerances lives in ``checks``.
"""

from __future__ import annotations

import numpy as np

from . import diffcore
from .dynamics import cmh_vf, magnetic_vf, magnetic_vf_from_gradient
from .symplectic import (
    MagneticField,
    exterior_derivative_matrix,
    split,
    symplectic_matrix,
)


def dgamma_plus_B_matrix(gamma, beta, q, engine=None):
    q = np.asarray(q, dtype=float)
    return exterior_derivative_matrix(gamma, q, engine) + np.asarray(beta(q), dtype=float)


def dgamma_plus_B_residual(gamma, beta, q, engine=None):
    """max |A(q) + beta(q)| where d gamma pairs as x @ A @ y."""
    return float(np.max(np.abs(dgamma_plus_B_matrix(gamma, beta, q, engine))))


def energy_along_section_gradient(gamma, H, q, engine=None):
    """Gradient of q -> H(gamma(q))."""
    return diffcore.gradient(lambda x: H(gamma(x)), q, engine)


def section_tangent(gamma, q, x, engine=None):
    """T gamma applied to a configuration vector x at q."""
    J = diffcore.jacobian(gamma.gammabar, np.asarray(q, dtype=float), engine)
    return np.concatenate([x, J @ x])


def hj1_residual(gamma, sys, q, engine=None):
    """T gamma (T pi X_cmh(gamma q)) - X^B_H(gamma q)."""
    q = np.asarray(q, dtype=float)
    z = gamma(q)
    x = cmh_vf(sys, z, engine)[: sys.n]
    return section_tangent(gamma, q, x, engine) - magnetic_vf(sys.H, sys.beta, z, engine)


def hj1_identity_residual(gamma, sys, q, engine=None):
    """Deviation from the exact identity  r_p = grad(H o gamma) - (A + beta) dH/dp.

    The q-block of the Type I residual is zero, and its p-block obeys this
    identity for every section; so the Type I equation holds exactly when
    d gamma = -B and H o gamma is locally constant.
    """
    q = np.asarray(q, dtype=float)
    r = hj1_residual(gamma, sys, q, engine)
    n = sys.n
    Hp = diffcore.gradient(sys.H, gamma(q), engine)[n:]
    predicted = energy_along_section_gradient(gamma, sys.H, q, engine) - dgamma_plus_B_matrix(
        gamma, sys.beta, q, engine
    ) @ Hp
    return float(max(np.max(np.abs(r[:n])), np.max(np.abs(r[n:] - predicted))))


def compensating_magnetic_field(gamma, engine=None):
    """Magnetic field beta = -A(q), so that d gamma + B vanishes identically."""
    return MagneticField(gamma.n, lambda q: -exterior_derivative_matrix(gamma, q, engine))


def symplectic_residual(eps, beta, z, v, w, engine=None):
    """|omega_B at eps(z) of (T eps v, T eps w) minus omega_B at z of (v, w)|."""
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    T = diffcore.jacobian(eps, z, engine)
    q_img, _ = split(np.asarray(eps(z), dtype=float))
    q, _ = split(z)
    lhs = (T @ v) @ symplectic_matrix(beta(q_img)) @ (T @ w)
    rhs = v @ symplectic_matrix(beta(q)) @ w
    return float(abs(lhs - rhs))


def symplectic_matrix_residual(eps, beta, z, engine=None, T=None):
    """max entry of T.T S(eps z) T - S(z); bounds symplectic_residual over unit vectors."""
    z = np.asarray(z, dtype=float)
    if T is None:
        T = diffcore.jacobian(eps, z, engine)
    q_img, _ = split(np.asarray(eps(z), dtype=float))
    q, _ = split(z)
    D = T.T @ symplectic_matrix(np.asarray(beta(q_img), float)) @ T - symplectic_matrix(np.asarray(beta(q), float))
    return float(np.max(np.abs(D)))


def pulled_back_magnetic_vf(H, eps, beta, z, engine=None, T=None):
    """X^B_{H o eps}(z), using grad(H o eps)(z) = T eps(z)^T grad H(eps z)."""
    z = np.asarray(z, dtype=float)
    if T is None:
        T = diffcore.jacobian(eps, z, engine)
    ez = np.asarray(eps(z), dtype=float)
    g = T.T @ diffcore.gradient(H, ez, engine)
    q, _ = split(z)
    return magnetic_vf_from_gradient(np.asarray(beta(q), float), g)


def hj2_residuals(gamma, eps, sys, z, engine=None):
    """(r1, r2) for the Type II equation at z.

    r1 = T gamma (T pi X_cmh(eps z)) - X^B_H(eps z)
    r2 = T eps X^B_{H o eps}(z) - T lambda X_cmh(eps z)
    """
    z = np.asarray(z, dtype=float)
    n = sys.n
    T = diffcore.jacobian(eps, z, engine)
    ez = np.asarray(eps(z), dtype=float)
    q_e = ez[:n]
    X = cmh_vf(sys, ez, engine)
    lam_X = section_tangent(gamma, q_e, X[:n], engine)
    r1 = lam_X - magnetic_vf(sys.H, sys.beta, ez, engine)
    r2 = T @ pulled_back_magnetic_vf(sys.H, eps, sys.beta, z, engine, T=T) - lam_X
    return r1, r2


def identity_map(z):
    return z
