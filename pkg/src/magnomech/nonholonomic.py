"""Pfaffian constraints, constraint frames and distributional CMH dynamics.

Constraints are rows of ``A(q)`` (velocities in ker A).  With a mechanical
Lagrangian of mass matrix ``M(q)`` the constraint submanifold of phase space
is ``c(q, p) = A(q) M(q)^{-1} p = 0``.  At a point of that submanifold the
frame holds orthonormal bases of

* TM = ker Dc,
* F  = {(dq, dp): A(q) dq = 0},
* K  = F ∩ TM and its omega_B-orthogonal complement,

together with the projector ``tau_K`` onto K along that complement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from . import diffcore
from .diffcore import null_space, numerical_rank, subspace_intersect
from .dynamics import (
    CmhSystem,
    canonical_vf,
    integrate,
    magnetic_vf,
    magnetic_vf_from_gradient,
    vertical_lift,
)
from .errors import CompatibilityError, ContractError, DegeneracyError
from .symplectic import split, symplectic_matrix

MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True)
class PfaffianDistribution:
    n: int
    k: int
    A: Callable

    def __call__(self, q):
        if self.k == 0:
            return np.zeros((0, self.n))
        return np.asarray(self.A(q)).reshape(self.k, self.n)

    @classmethod
    def unconstrained(cls, n):
        return cls(n, 0, lambda q: np.zeros((0, n)))

    def basis(self, q):
        """Orthonormal basis of D_q = ker A(q)."""
        return null_space(np.asarray(self(np.asarray(q, float)), float))

    def rank_ok(self, q, rtol=1e-8):
        if self.k == 0:
            return True
        s = np.linalg.svd(np.asarray(self(np.asarray(q, float)), float), compute_uv=False)
        return s.size == self.k and s[0] > 0.0 and s[-1] >= rtol * s[0]


@dataclass(frozen=True)
class MechanicalLagrangian:
    """L = 1/2 v.M(q).v - V(q)."""

    n: int
    mass: Callable
    potential: Optional[Callable] = None

    def mass_at(self, q):
        return np.asarray(self.mass(q))

    def V(self, q):
        return 0.0 if self.potential is None else self.potential(q)

    def hamiltonian(self, z):
        q, p = split(np.asarray(z))
        return 0.5 * (p @ diffcore.solve(self.mass_at(q), p)) + self.V(q)

    def legendre(self, q, v):
        return np.concatenate([q, self.mass_at(q) @ v])

    @classmethod
    def identity_mass(cls, n, potential=None):
        eye = np.eye(n)
        return cls(n, lambda q: eye, potential)


@dataclass(frozen=True)
class NonholonomicCmhSystem:
    sys: CmhSystem
    dist: PfaffianDistribution
    lagrangian: MechanicalLagrangian

    def __post_init__(self):
        if not (self.sys.n == self.dist.n == self.lagrangian.n):
            raise ContractError("nonholonomic system dimensions disagree")

    @property
    def n(self):
        return self.sys.n

    @property
    def k(self):
        return self.dist.k

    @classmethod
    def from_lagrangian(cls, lagrangian, dist, beta, force=None, control=None):
        sys = CmhSystem(lagrangian.n, lagrangian.hamiltonian, beta, force, control)
        return cls(sys, dist, lagrangian)


def _check_spd(Mq):
    Mq = np.asarray(diffcore.primal(Mq), dtype=float)
    try:
        np.linalg.cholesky(0.5 * (Mq + Mq.T))
    except np.linalg.LinAlgError:
        raise DegeneracyError("mass matrix is not symmetric positive definite") from None


def constraint_functions(nh, z):
    """c(q, p) = A(q) M(q)^{-1} p."""
    q, p = split(np.asarray(z))
    if nh.k == 0:
        return np.zeros(0)
    Mq = nh.lagrangian.mass_at(q)
    _check_spd(Mq)
    return nh.dist(q) @ diffcore.solve(Mq, p)


def constraint_norm(nh, z):
    c = np.asarray(constraint_functions(nh, z), dtype=float)
    return float(np.max(np.abs(c), initial=0.0))


def project_to_M(nh, z):
    """Closest point of the constraint submanifold at fixed q, in the M^{-1} metric."""
    z = np.asarray(z)
    if nh.k == 0:
        return z
    q, p = split(z)
    Mq = nh.lagrangian.mass_at(q)
    A = nh.dist(q)
    MinvAT = diffcore.solve(Mq, A.T)
    G = A @ MinvAT
    if z.dtype != object and numerical_rank(G) < nh.k:
        raise DegeneracyError("constraint rows lost rank")
    lam = diffcore.solve(G, A @ diffcore.solve(Mq, p))
    return np.concatenate([q, p - A.T @ lam])


@dataclass
class ConstraintFrame:
    z: np.ndarray
    S: np.ndarray
    basis_TM: np.ndarray
    basis_F: np.ndarray
    basis_K: np.ndarray
    basis_Kperp: np.ndarray
    tau_K: Optional[np.ndarray]
    admissible: bool
    compatible: bool
    gram: Optional[np.ndarray] = field(default=None, repr=False)

    def require_compatible(self):
        if not self.compatible:
            raise CompatibilityError("omega_B restricted to K is degenerate at this point")


def frame_at(nh, z, engine=None, check_on_M=True):
    """Constraint frame at a point of the constraint submanifold."""
    z = np.asarray(z, dtype=float)
    n = nh.n
    q = z[:n]
    if check_on_M and constraint_norm(nh, z) > MEMBERSHIP_TOL:
        raise ContractError(f"point is not on the constraint submanifold (|c| = {constraint_norm(nh, z):.3e})")
    S = symplectic_matrix(np.asarray(nh.sys.beta(q), float))
    if nh.k == 0:
        eye = np.eye(2 * n)
        return ConstraintFrame(z, S, eye, eye, eye, np.zeros((2 * n, 0)), eye, True, True, S.copy())
    if not nh.dist.rank_ok(q):
        raise DegeneracyError("constraint matrix A(q) lost rank")
    Dc = np.asarray(diffcore.jacobian(lambda x: constraint_functions(nh, x), z, engine), float)
    A = np.asarray(nh.dist(q), float)
    basis_TM = null_space(Dc)
    basis_F = null_space(np.hstack([A, np.zeros_like(A)]))
    basis_K = subspace_intersect(basis_F, basis_TM)
    admissible = basis_TM.shape[1] == basis_F.shape[1]
    F_perp = null_space(basis_F.T @ S)
    compatible = subspace_intersect(basis_TM, F_perp).shape[1] == 0
    G = basis_K.T @ S @ basis_K
    if numerical_rank(G) < G.shape[0]:
        compatible = False
    basis_Kperp = null_space(basis_K.T @ S)
    tau = basis_K @ np.linalg.solve(G, basis_K.T @ S) if compatible else None
    return ConstraintFrame(z, S, basis_TM, basis_F, basis_K, basis_Kperp, tau, admissible, compatible, G)


def distributional_vf(nh, frame, engine=None):
    """X_K in K solving omega_B(X_K, k) = dH(k) for all k in K."""
    frame.require_compatible()
    g = np.asarray(diffcore.gradient(nh.sys.H, frame.z, engine), float)
    BK = frame.basis_K
    x = np.linalg.solve(frame.gram.T, BK.T @ g)
    return BK @ x


def multiplier_oracle_vf(nh, z, engine=None):
    """Constrained field from the bordered system, without any frame.

    Unknowns X (2n) and multipliers lam (k):
        S.T X - [A, 0].T lam = grad H      (i_X omega_B - dH annihilates F)
        Dc X = 0                           (X tangent to the constraint set)
    Accepts dual-valued z, so flows of this field can be differentiated.
    """
    z = np.asarray(z)
    n, k = nh.n, nh.k
    q = z[:n]
    g = diffcore.gradient(nh.sys.H, z, engine)
    if k == 0:
        return magnetic_vf_from_gradient(nh.sys.beta(q), g)
    Dc = diffcore.jacobian(lambda x: constraint_functions(nh, x), z, engine)
    A = nh.dist(q)
    S = symplectic_matrix(nh.sys.beta(q))
    dtype = object if any(np.asarray(a).dtype == object for a in (Dc, A, S, g)) else float
    big = np.zeros((2 * n + k, 2 * n + k), dtype=dtype)
    big[: 2 * n, : 2 * n] = S.T
    big[:n, 2 * n :] = -A.T
    big[2 * n :, : 2 * n] = Dc
    rhs = np.concatenate([g, np.zeros(k)])
    if dtype == float and numerical_rank(big) < 2 * n + k:
        raise DegeneracyError("multiplier system is singular")
    sol = diffcore.solve(big, rhs)
    return sol[: 2 * n]


def _projected_lifts(nh, frame, XB, engine):
    out = []
    for m in nh.sys.fiber_maps():
        out.append(frame.tau_K @ vertical_lift(m, None, frame.z, engine, base_value=XB))
    return out


@dataclass
class DistributionalFields:
    """All pieces of the distributional CMH field at one frame."""

    X_B_K: np.ndarray  # tau_K X^B_H, solved directly
    X_K: np.ndarray  # tau_K X_H
    X0_K: np.ndarray  # tau_K (X^B_H - X_H)
    lifts: list  # tau_K vlift(.) X^B_H for force then control

    @property
    def cmh(self):
        return self.X_B_K + sum(self.lifts, np.zeros_like(self.X_B_K))

    @property
    def vanishing(self):
        return self.X0_K + sum(self.lifts, np.zeros_like(self.X_B_K))


def distributional_fields(nh, frame, engine=None):
    frame.require_compatible()
    XBK = distributional_vf(nh, frame, engine)
    XB = np.asarray(magnetic_vf(nh.sys.H, nh.sys.beta, frame.z, engine), float)
    XH = np.asarray(canonical_vf(nh.sys.H, frame.z, engine), float)
    tau = frame.tau_K
    return DistributionalFields(XBK, tau @ XH, tau @ XB - tau @ XH, _projected_lifts(nh, frame, XB, engine))


def distributional_cmh_vf(nh, frame, engine=None):
    """X^B_K + tau_K vlift(F) X^B_H + tau_K vlift(u) X^B_H."""
    return distributional_fields(nh, frame, engine).cmh


def dist_magnetic_vanishing_residual(nh, frame, engine=None):
    return distributional_fields(nh, frame, engine).vanishing


def dist_decomposition_residual(nh, frame, engine=None):
    """|X_cmh,K - X_K - r_K| with X_K = tau_K X_H."""
    f = distributional_fields(nh, frame, engine)
    return float(np.max(np.abs(f.cmh - f.X_K - f.vanishing)))


def energy_rate(nh, frame, engine=None):
    """dH(X^B_K): zero by antisymmetry of omega_B on K."""
    g = np.asarray(diffcore.gradient(nh.sys.H, frame.z, engine), float)
    return float(g @ distributional_vf(nh, frame, engine))


# ------------------------------------------------------------ bracket generation


def _local_frame_fields(dist, q0):
    """Vector fields spanning D near q0, normalised on fixed pivot columns."""
    n, k = dist.n, dist.k
    if k == 0:
        return [lambda q, i=i: np.eye(n)[i] + 0 * q[0] for i in range(n)]
    A0 = np.asarray(dist(np.asarray(q0, float)), float)
    # Greedy pivot choice: columns giving the best-conditioned k x k block.
    _, _, piv = _qr_pivots(A0)
    pivots = sorted(piv[:k])
    free = [j for j in range(n) if j not in pivots]
    fields = []
    for j in free:

        def X(q, j=j):
            A = dist(q)
            Ap = A[:, pivots]
            x = np.empty(n, dtype=object)
            for i in range(n):
                x[i] = 0.0
            x[j] = 1.0
            sol = diffcore.solve(Ap, -A[:, j])
            for a, col in enumerate(pivots):
                x[col] = sol[a]
            return diffcore._tidy(x)

        fields.append(X)
    return fields


def _qr_pivots(A):
    return scipy.linalg.qr(A, pivoting=True)


def lie_bracket(X, Y, engine=None):
    """[X, Y](q) = DY(q) X(q) - DX(q) Y(q)."""
    return lambda q: diffcore.jacobian(Y, q, engine) @ X(q) - diffcore.jacobian(X, q, engine) @ Y(q)


def bracket_generating_check(dist, q0, max_depth, engine=None):
    """(spans, rank): whether brackets up to ``max_depth`` span R^n at q0."""
    q0 = np.asarray(q0, dtype=float)
    base = _local_frame_fields(dist, q0)
    collected = [np.asarray(X(q0), float) for X in base]
    rank = numerical_rank(np.array(collected).T) if collected else 0
    level = base
    for _ in range(2, max_depth + 1):
        if rank == dist.n:
            break
        level = [lie_bracket(X, Y, engine) for X in level for Y in base]
        collected += [np.asarray(diffcore.primal(np.asarray(B(q0))), float) for B in level]
        rank = numerical_rank(np.array(collected).T)
    return rank == dist.n, int(rank)


# ------------------------------------------------------------ Hamilton-Jacobi


def dgamma_plus_B_on_D_residual(gamma, beta, dist, q, engine=None):
    """max |x.(A_dgamma + beta).y| over an orthonormal basis of D_q."""
    from .hamilton_jacobi import dgamma_plus_B_matrix

    q = np.asarray(q, dtype=float)
    D = dist.basis(q)
    if D.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(D.T @ dgamma_plus_B_matrix(gamma, beta, q, engine) @ D)))


def energy_on_D_residual(gamma, nh, q, engine=None):
    """|d(H o gamma) restricted to D_q|."""
    from .hamilton_jacobi import energy_along_section_gradient

    q = np.asarray(q, dtype=float)
    D = nh.dist.basis(q)
    g = energy_along_section_gradient(gamma, nh.sys.H, q, engine)
    return float(np.max(np.abs(D.T @ g), initial=0.0))


def section_image_residual(gamma, nh, q):
    """|c(gamma(q))|: zero iff gamma(q) lies on the constraint submanifold."""
    return constraint_norm(nh, gamma(np.asarray(q, float)))


def section_tangent_in_K_residual(gamma, nh, q, frame=None, engine=None):
    """Distance of T gamma(D_q) from K at gamma(q)."""
    q = np.asarray(q, dtype=float)
    D = nh.dist.basis(q)
    J = np.asarray(diffcore.jacobian(gamma.gammabar, q, engine), float)
    images = np.vstack([D, J @ D])
    if frame is None:
        frame = frame_at(nh, gamma(q), engine, check_on_M=False)
    return diffcore.span_residual(frame.basis_K, images)


def magnetic_field_in_D_residual(nh, z, engine=None):
    """|A(q) T pi X^B_H(z)|: the magnetic field at z projects into D."""
    z = np.asarray(z, dtype=float)
    q = z[: nh.n]
    XB = np.asarray(magnetic_vf(nh.sys.H, nh.sys.beta, z, engine), float)
    return float(np.max(np.abs(np.asarray(nh.dist(q), float) @ XB[: nh.n]), initial=0.0))


def lemma63_check(nh, points, tol=MEMBERSHIP_TOL, engine=None):
    """(max residual, hypothesis_ok) over phase points that should lie on M."""
    hyp = all(constraint_norm(nh, z) <= tol for z in points)
    res = max((magnetic_field_in_D_residual(nh, z, engine) for z in points), default=0.0)
    return res, hyp


def hj1_dist_residual(gamma, nh, q, engine=None):
    """T gamma (T pi X_cmh,K(gamma q)) - X^B_K(gamma q)."""
    from .hamilton_jacobi import section_tangent

    q = np.asarray(q, dtype=float)
    z = np.asarray(gamma(q), float)
    frame = frame_at(nh, z, engine, check_on_M=False)
    f = distributional_fields(nh, frame, engine)
    x = f.cmh[: nh.n]
    return section_tangent(gamma, q, x, engine) - f.X_B_K


def pulled_back_field_projected(nh, eps, z, engine=None, T=None):
    """tau_K(eps z) T eps X^B_{H o eps}(z)."""
    from .hamilton_jacobi import pulled_back_magnetic_vf

    z = np.asarray(z, dtype=float)
    if T is None:
        T = np.asarray(diffcore.jacobian(eps, z, engine), float)
    ez = np.asarray(eps(z), float)
    frame = frame_at(nh, ez, engine, check_on_M=False)
    frame.require_compatible()
    return frame.tau_K @ (T @ pulled_back_magnetic_vf(nh.sys.H, eps, nh.sys.beta, z, engine, T=T)), frame


def hj2_dist_residuals(gamma, eps, nh, z, engine=None):
    """(r1, r2) of the distributional Type II equation at z."""
    from .hamilton_jacobi import section_tangent

    z = np.asarray(z, dtype=float)
    n = nh.n
    T = np.asarray(diffcore.jacobian(eps, z, engine), float)
    left, frame = pulled_back_field_projected(nh, eps, z, engine, T=T)
    ez = frame.z
    f = distributional_fields(nh, frame, engine)
    lam_X = section_tangent(gamma, ez[:n], f.cmh[:n], engine)
    r1 = lam_X - f.X_B_K
    r2 = left - lam_X
    return r1, r2


# ------------------------------------------------------------ integration


def constrained_vf(nh, engine=None):
    """Distributional CMH field as a function of z (frames built off M allowed)."""

    def vf(z):
        frame = frame_at(nh, z, engine, check_on_M=False)
        return distributional_cmh_vf(nh, frame, engine)

    return vf


def integrate_constrained(nh, z0, dt, steps, method="rk4", engine=None):
    """rk4 (or Euler) on the distributional CMH field with re-projection after every step."""
    z0 = project_to_M(nh, np.asarray(z0, dtype=float))
    return integrate(constrained_vf(nh, engine), z0, dt, steps, method, post_step=lambda z: project_to_M(nh, z))


def oracle_flow_map(nh, time, substeps, engine=None):
    """Time-``time`` map of the constrained field (no forces), re-projected onto M.

    Built from the multiplier formulation so it can be differentiated.
    """

    def eps(z):
        z = np.asarray(z)
        dt = time / substeps
        vf = lambda x: multiplier_oracle_vf(nh, x, engine)
        for _ in range(substeps):
            k1 = vf(z)
            k2 = vf(z + 0.5 * dt * k1)
            k3 = vf(z + 0.5 * dt * k2)
            k4 = vf(z + dt * k3)
            z = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return project_to_M(nh, z)

    return eps
