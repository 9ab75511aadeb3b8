"""Transport of CMH data along configuration diffeomorphisms.

For phi: Q1 -> Q2 the cotangent lift goes backwards,
``lift(q2, p2) = (phi_inv(q2), Dphi(phi_inv(q2)).T @ p2)`` from T*Q2 to T*Q1,
and ``push`` is its inverse.  A system on Q2 is conjugated to Q1 by pulling
back every ingredient; ``cmh2_residual`` then measures whether the closed-loop
fields correspond.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import diffcore
from .dynamics import CmhSystem, FiberMap, cmh_vf, magnetic_vanishing_residual, magnetic_vf
from .errors import ContractError, DegeneracyError
from .hamilton_jacobi import hj1_residual, hj2_residuals, symplectic_matrix_residual
from .symplectic import MagneticField, OneFormSection, split, symplectic_matrix


@dataclass(frozen=True)
class ConfigDiffeo:
    """Diffeomorphism phi: R^n -> R^n with a user-supplied inverse."""

    n: int
    phi: Callable
    phi_inv: Callable

    def jacobian(self, q, engine=None):
        return diffcore.jacobian(self.phi, q, engine)

    def inverse_residual(self, q):
        q = np.asarray(q, dtype=float)
        a = np.asarray(self.phi(np.asarray(self.phi_inv(q))), float) - q
        b = np.asarray(self.phi_inv(np.asarray(self.phi(q))), float) - q
        return float(max(np.max(np.abs(a)), np.max(np.abs(b))))

    def compose(self, other):
        """self after other: q -> self.phi(other.phi(q))."""
        return ConfigDiffeo(
            self.n,
            lambda q: self.phi(other.phi(q)),
            lambda q: other.phi_inv(self.phi_inv(q)),
        )

    @classmethod
    def linear(cls, M, shift=None):
        M = np.asarray(M, dtype=float)
        c = np.zeros(M.shape[0]) if shift is None else np.asarray(shift, dtype=float)
        Minv = np.linalg.inv(M)
        return cls(M.shape[0], lambda q: M @ q + c, lambda q: Minv @ (q - c))

    @classmethod
    def identity(cls, n):
        return cls(n, lambda q: q, lambda q: q)


def _check_jacobian(J):
    if abs(np.linalg.det(np.asarray(diffcore.primal(J), dtype=float))) <= 1e-10:
        raise DegeneracyError("diffeomorphism Jacobian is singular")


def cotangent_lift(phi, z2, engine=None):
    """T*Q2 -> T*Q1: (q2, p2) -> (phi_inv(q2), Dphi(phi_inv q2).T p2)."""
    q2, p2 = split(np.asarray(z2))
    q1 = np.asarray(phi.phi_inv(q2))
    J = phi.jacobian(q1, engine)
    _check_jacobian(J)
    return np.concatenate([q1, J.T @ p2])


def cotangent_push(phi, z1, engine=None):
    """Inverse of cotangent_lift: T*Q1 -> T*Q2."""
    q1, p1 = split(np.asarray(z1))
    J = phi.jacobian(q1, engine)
    _check_jacobian(J)
    return np.concatenate([np.asarray(phi.phi(q1)), diffcore.solve(J.T, p1)])


def pullback_magnetic_field(phi, beta2, engine=None):
    """beta1(q1) = Dphi.T beta2(phi q1) Dphi."""

    def beta1(q1):
        J = phi.jacobian(q1, engine)
        return J.T @ np.asarray(beta2(np.asarray(phi.phi(q1)))) @ J

    return MagneticField(beta2.n, beta1)


def transport_one_form(phi, gamma2, engine=None):
    """gammabar1(q1) = Dphi(q1).T gammabar2(phi q1)."""

    def gb1(q1):
        J = phi.jacobian(q1, engine)
        return J.T @ np.asarray(gamma2.gammabar(np.asarray(phi.phi(q1))))

    return OneFormSection(gamma2.n, gb1)


def transport_phase_map(phi, eps2, engine=None):
    """eps1 = lift o eps2 o push."""
    return lambda z1: cotangent_lift(phi, eps2(cotangent_push(phi, z1, engine)), engine)


def _conjugate_fiber_map(phi, fmap, engine):
    if fmap is None:
        return None

    def f1(z1):
        q1, _ = split(np.asarray(z1))
        J = phi.jacobian(q1, engine)
        z2 = cotangent_push(phi, z1, engine)
        return J.T @ np.asarray(fmap.f(z2))

    return FiberMap(fmap.n, f1)


def conjugate_system(phi, sys2, engine=None):
    """System on Q1 obtained by pulling every ingredient of sys2 back through phi."""
    return CmhSystem(
        sys2.n,
        lambda z1: sys2.H(cotangent_push(phi, z1, engine)),
        pullback_magnetic_field(phi, sys2.beta, engine),
        _conjugate_fiber_map(phi, sys2.force, engine),
        _conjugate_fiber_map(phi, sys2.control, engine),
    )


@dataclass(frozen=True)
class SystemPair:
    sys1: CmhSystem
    sys2: CmhSystem
    phi: ConfigDiffeo

    def __post_init__(self):
        if not (self.sys1.n == self.sys2.n == self.phi.n):
            raise ContractError("system pair dimensions disagree")

    @classmethod
    def conjugated(cls, phi, sys2, engine=None):
        return cls(conjugate_system(phi, sys2, engine), sys2, phi)


def lift_tangent(pair, z2, engine=None):
    return diffcore.jacobian(lambda z: cotangent_lift(pair.phi, z, engine), np.asarray(z2, float), engine)


def _transport_gap(pair, z2, field1, field2, engine):
    z2 = np.asarray(z2, dtype=float)
    z1 = np.asarray(cotangent_lift(pair.phi, z2, engine), dtype=float)
    T = lift_tangent(pair, z2, engine)
    return float(np.max(np.abs(field1(z1) - T @ field2(z2))))


def cmh2_residual(pair, z2, engine=None):
    """|X_cmh,1(lift z2) - T lift X_cmh,2(z2)|."""
    return _transport_gap(pair, z2, lambda z: cmh_vf(pair.sys1, z, engine), lambda z: cmh_vf(pair.sys2, z, engine), engine)


def magnetic_correspondence_residual(pair, z2, engine=None):
    """|X^B_{H1}(lift z2) - T lift X^B_{H2}(z2)|."""
    return _transport_gap(
        pair,
        z2,
        lambda z: magnetic_vf(pair.sys1.H, pair.sys1.beta, z, engine),
        lambda z: magnetic_vf(pair.sys2.H, pair.sys2.beta, z, engine),
        engine,
    )


def vanishing_correspondence_residual(pair, z2, engine=None):
    """|r1(lift z2) - T lift r2(z2)| for the magnetic vanishing residuals."""
    return _transport_gap(
        pair,
        z2,
        lambda z: magnetic_vanishing_residual(pair.sys1, z, engine),
        lambda z: magnetic_vanishing_residual(pair.sys2, z, engine),
        engine,
    )


def lift_symplectic_residual(pair, z2, engine=None):
    """Does the lift pull omega_B1 back to omega_B2?  max entry of T.T S1 T - S2."""
    z2 = np.asarray(z2, dtype=float)
    lift = lambda z: cotangent_lift(pair.phi, z, engine)
    T = lift_tangent(pair, z2, engine)
    z1 = np.asarray(lift(z2), dtype=float)
    n = pair.phi.n
    S1 = symplectic_matrix(np.asarray(pair.sys1.beta(z1[:n]), float))
    S2 = symplectic_matrix(np.asarray(pair.sys2.beta(z2[:n]), float))
    return float(np.max(np.abs(T.T @ S1 @ T - S2)))


def functoriality_residual(phi, psi, z3, engine=None):
    """|lift(phi o psi)(z3) - lift(psi)(lift(phi)(z3))| for psi: Q1->Q2, phi: Q2->Q3."""
    composed = phi.compose(psi)
    a = cotangent_lift(composed, z3, engine)
    b = cotangent_lift(psi, cotangent_lift(phi, z3, engine), engine)
    return float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float))))


@dataclass
class TransportReport:
    kind: str
    hypotheses_ok: bool
    cmh2: float
    magnetic_correspondence: float
    source_residual: float
    transported_residual: float
    tol: float

    @property
    def source_pass(self):
        return self.source_residual <= self.tol

    @property
    def transported_pass(self):
        return self.transported_residual <= self.tol

    @property
    def verdicts_match(self):
        return self.source_pass == self.transported_pass

    @property
    def verdict_pair(self):
        fmt = lambda ok: "pass" if ok else "fail"
        return f"{fmt(self.source_pass)}/{fmt(self.transported_pass)}"


def solution_transport_check(pair, samples_q2, gamma2, eps2=None, tol=1e-6, engine=None):
    """Compare Type I (or Type II when eps2 is given) verdicts before and after transport.

    For Type I the samples are configuration points q2; for Type II the
    samples are the phase points gamma2(q2).  Hypotheses are the controlled-field and
    magnetic correspondences at the sampled phase points.
    """
    phi = pair.phi
    samples_q2 = [np.asarray(q, float) for q in samples_q2]
    z2s = [np.asarray(gamma2(q), float) for q in samples_q2]
    cmh2 = max(cmh2_residual(pair, z, engine) for z in z2s)
    mag = max(magnetic_correspondence_residual(pair, z, engine) for z in z2s)
    gamma1 = transport_one_form(phi, gamma2, engine)
    if eps2 is None:
        kind = "type1"
        src = max(np.max(np.abs(hj1_residual(gamma2, pair.sys2, q, engine))) for q in samples_q2)
        dst = max(
            np.max(np.abs(hj1_residual(gamma1, pair.sys1, np.asarray(phi.phi_inv(q), float), engine)))
            for q in samples_q2
        )
    else:
        kind = "type2"
        eps1 = transport_phase_map(phi, eps2, engine)
        src = dst = 0.0
        for z2 in z2s:
            r1, r2 = hj2_residuals(gamma2, eps2, pair.sys2, z2, engine)
            src = max(src, np.max(np.abs(r1)), np.max(np.abs(r2)))
            z1 = np.asarray(cotangent_lift(phi, z2, engine), float)
            r1, r2 = hj2_residuals(gamma1, eps1, pair.sys1, z1, engine)
            dst = max(dst, np.max(np.abs(r1)), np.max(np.abs(r2)))
    return TransportReport(kind, cmh2 <= tol and mag <= tol, cmh2, mag, float(src), float(dst), tol)


def transported_symplectic_residual(pair, eps2, z1, engine=None):
    eps1 = transport_phase_map(pair.phi, eps2, engine)
    return symplectic_matrix_residual(eps1, pair.sys1.beta, z1, engine)
