"""Canonical and magnetic symplectic forms on T*R^n, one-form sections, closedness.

Conventions used throughout the package:

* A phase point is ``z = (q, p)`` stored as one vector of length 2n.
* A magnetic two-form on configuration space is a skew matrix field ``beta(q)``
  with pairing ``B(x, y) = x @ beta(q) @ y``.
* The magnetic symplectic matrix is ``S = [[-beta, I], [-I, 0]]`` and
  ``omega_B(v, w) = v @ S @ w``.

In the force law this gives ``dp/dt = -dH/dq + beta @ dH/dp``.  A printed
coefficient matrix ``b`` with ``dp_i/dt = -dH/dq_i - sum_j b_ij dH/dp_j`` is
therefore ``beta = -b`` (see ``MagneticField.from_force_coefficients``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import diffcore
from .errors import ContractError


def split(z):
    z = np.asarray(z)
    if z.ndim != 1 or z.shape[0] % 2:
        raise ContractError(f"phase point must be a vector of even length, got shape {z.shape}")
    n = z.shape[0] // 2
    return z[:n], z[n:]


@dataclass(frozen=True)
class MagneticField:
    """Skew-matrix-valued field beta(q) on R^n."""

    n: int
    beta: Callable
    constant: Optional[np.ndarray] = field(default=None, compare=False)

    def __call__(self, q):
        if self.constant is not None:
            return self.constant
        return np.asarray(self.beta(q))

    @classmethod
    def from_constant(cls, matrix):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ContractError("magnetic matrix must be square")
        matrix.setflags(write=False)
        return cls(matrix.shape[0], lambda q: matrix, matrix)

    @classmethod
    def zero(cls, n):
        return cls.from_constant(np.zeros((n, n)))

    @classmethod
    def from_force_coefficients(cls, b):
        """Field whose Lorentz term reads dp_i/dt = ... - sum_j b_ij dH/dp_j."""
        return cls.from_constant(-np.asarray(b, dtype=float))

    @property
    def is_zero(self):
        return self.constant is not None and not np.any(self.constant)


@dataclass(frozen=True)
class OneFormSection:
    """Section q -> (q, gammabar(q)) of T*R^n."""

    n: int
    gammabar: Callable

    def __call__(self, q):
        q = np.asarray(q)
        return np.concatenate([q, np.asarray(self.gammabar(q))])

    def momentum(self, q):
        return np.asarray(self.gammabar(q))

    def fiber_projection(self, z):
        """lambda = gamma o pi_Q: phase point -> phase point on the image of gamma."""
        q, _ = split(z)
        return self(q)


def symplectic_matrix(beta_q):
    """S = [[-beta, I], [-I, 0]] for a given pairing matrix beta at one point."""
    beta_q = np.asarray(beta_q)
    n = beta_q.shape[0]
    dtype = object if beta_q.dtype == object else float
    S = np.zeros((2 * n, 2 * n), dtype=dtype)
    S[:n, :n] = -beta_q
    S[:n, n:] = np.eye(n)
    S[n:, :n] = -np.eye(n)
    return S


def canonical_matrix(n):
    return symplectic_matrix(np.zeros((n, n)))


def omega_B(beta_field, z, v, w):
    """omega_B at z applied to tangent vectors v, w."""
    q, _ = split(z)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != (2 * beta_field.n,) or w.shape != v.shape:
        raise ContractError("tangent vectors must have length 2n")
    return float(v @ symplectic_matrix(beta_field(q)) @ w)


def skewness_residual(beta_field, q):
    b = np.asarray(beta_field(q), dtype=float)
    return float(np.max(np.abs(b + b.T), initial=0.0))


def exterior_derivative_matrix(gamma, q, engine=None):
    """Skew matrix A(q) with d gamma(x, y) = x @ A @ y, i.e. A = J.T - J for J = D gammabar."""
    J = diffcore.jacobian(gamma.gammabar, q, engine)
    return J.T - J


def closedness_residual(beta_field, q, engine=None):
    """max_{ijk} |d_k beta_ij + d_i beta_jk + d_j beta_ki| at q."""
    if beta_field.constant is not None:
        return 0.0
    n = beta_field.n
    D = diffcore.jacobian(lambda x: np.asarray(beta_field(x)).reshape(-1), q, engine)
    D = np.asarray(D, dtype=float).reshape(n, n, n)  # D[i, j, k] = d_k beta_ij
    cyc = D + np.transpose(D, (1, 2, 0)) + np.transpose(D, (2, 0, 1))
    return float(np.max(np.abs(cyc), initial=0.0))


def pullback_two_form(phase_map, beta_field, z, v, w, engine=None):
    """(phase_map^* omega_B)_z(v, w) = omega_B at phase_map(z) of the pushed-forward vectors."""
    z = np.asarray(z, dtype=float)
    T = diffcore.jacobian(phase_map, z, engine)
    image = np.asarray(phase_map(z), dtype=float)
    return omega_B(beta_field, image, T @ np.asarray(v, float), T @ np.asarray(w, float))


def pullback_matrix(phase_map, beta_field, z, engine=None):
    """Matrix of phase_map^* omega_B at z: T.T @ S(phase_map(z)) @ T."""
    z = np.asarray(z, dtype=float)
    T = diffcore.jacobian(phase_map, z, engine)
    image = np.asarray(phase_map(z), dtype=float)
    q_img, _ = split(image)
    return T.T @ symplectic_matrix(beta_field(q_img)) @ T


def pullback_identity_residuals(gamma, beta_field, z, v, w, engine=None):
    """Residuals of the two pullback identities for lambda = gamma o pi_Q.

    (i)  lambda^* omega_B(v, w) = -(d gamma + B)(T pi v, T pi w)
    (ii) omega_B(T lambda v, w) = omega_B(v, w - T lambda w) - (d gamma + B)(T pi v, T pi w)
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    n = gamma.n
    q = z[:n]
    A = exterior_derivative_matrix(gamma, q, engine)
    form = v[:n] @ (A + np.asarray(beta_field(q), float)) @ w[:n]
    lam = gamma.fiber_projection
    T = diffcore.jacobian(lam, z, engine)
    res_i = pullback_two_form(lam, beta_field, z, v, w, engine) + form
    lhs = omega_B(beta_field, z, T @ v, w)
    rhs = omega_B(beta_field, z, v, w - T @ w) - form
    return abs(res_i), abs(lhs - rhs)
