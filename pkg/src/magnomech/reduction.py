"""Reduction by translations of cyclic coordinates.

The group R^s acts by shifting the configuration coordinates listed in
``cyclic``; the quotient chart simply drops those q-entries, so a reduced
phase point has length 2n - s.  Reduced objects are evaluated at the lift
with the dropped coordinates set to zero (``lift``) unless a different lift
is requested.

Construction at a point z of the constraint submanifold:

* V = span{(e_a, 0) : a cyclic}                 infinitesimal symmetries
* U = {u in K : omega_B(u, y) = 0 for y in V∩K}
* Kbar = drop(U), with the pushed-down two-form omega_bar(drop u1, drop u2)
  := omega_B(u1, u2), well defined because U∩V is its radical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore
from .diffcore import null_space, numerical_rank, orth, subspace_intersect
from .dynamics import magnetic_vf, vertical_lift
from .errors import CompatibilityError, ContractError
from .nonholonomic import distributional_fields, frame_at


@dataclass(frozen=True)
class TranslationSymmetry:
    n: int
    cyclic: tuple  # 0-based indices

    def __post_init__(self):
        if len(set(self.cyclic)) != len(self.cyclic) or any(not 0 <= a < self.n for a in self.cyclic):
            raise ContractError(f"invalid cyclic index set {self.cyclic} for n={self.n}")

    @property
    def s(self):
        return len(self.cyclic)

    @property
    def kept(self):
        """Indices of phase coordinates that survive the quotient."""
        return [i for i in range(self.n) if i not in self.cyclic] + list(range(self.n, 2 * self.n))

    @property
    def reduced_dim(self):
        return 2 * self.n - self.s

    def drop(self, v):
        """T pi_{/G} in the quotient chart (rows or columns of the first axis)."""
        return np.asarray(v)[self.kept]

    def project(self, z):
        return self.drop(z)

    def lift(self, zbar, qs=None):
        z = np.zeros(2 * self.n)
        z[self.kept] = zbar
        if qs is not None:
            z[list(self.cyclic)] = qs
        return z

    def shift(self, z, c):
        z = np.array(z, dtype=float)
        z[list(self.cyclic)] += c
        return z

    def vertical_basis(self):
        V = np.zeros((2 * self.n, self.s))
        for j, a in enumerate(self.cyclic):
            V[a, j] = 1.0
        return V


def invariance_residual(nh, sym, samples, shifts, include_gamma=None):
    """Largest change of any system ingredient under shifts of the cyclic coordinates."""
    if sym.s == 0:
        return 0.0
    n = nh.n
    worst = 0.0

    def gap(a, b):
        return float(np.max(np.abs(np.asarray(a, float) - np.asarray(b, float)), initial=0.0))

    for z in samples:
        z = np.asarray(z, dtype=float)
        for c in shifts:
            zs = sym.shift(z, c)
            q, qs = z[:n], zs[:n]
            worst = max(worst, gap(nh.sys.H(z), nh.sys.H(zs)))
            worst = max(worst, gap(nh.sys.beta(q), nh.sys.beta(qs)))
            worst = max(worst, gap(nh.dist(q), nh.dist(qs)))
            worst = max(worst, gap(nh.lagrangian.mass_at(q), nh.lagrangian.mass_at(qs)))
            worst = max(worst, gap(nh.lagrangian.V(q), nh.lagrangian.V(qs)))
            for m in nh.sys.fiber_maps():
                worst = max(worst, gap(m.f(z), m.f(zs)))
            if include_gamma is not None:
                worst = max(worst, gap(include_gamma.gammabar(q), include_gamma.gammabar(qs)))
    return worst


def section_invariance_residual(gamma, sym, qs, shifts):
    worst = 0.0
    for q in qs:
        q = np.asarray(q, float)
        for c in shifts:
            q2 = q.copy()
            q2[list(sym.cyclic)] += c
            worst = max(worst, float(np.max(np.abs(np.asarray(gamma.gammabar(q), float) - np.asarray(gamma.gammabar(q2), float)))))
    return worst


@dataclass
class ReducedFrame:
    z: np.ndarray  # lift used for evaluation
    zbar: np.ndarray
    frame: object  # unreduced ConstraintFrame at z
    basis_V: np.ndarray
    basis_VK: np.ndarray
    basis_U: np.ndarray
    basis_UV: np.ndarray
    basis_Kbar: np.ndarray
    lift_coeffs: np.ndarray  # U-coordinates of lifts of the Kbar basis
    gram: np.ndarray  # pushed-down two-form in the Kbar basis
    compatible: bool

    def lift_vectors(self):
        """Lifts in U of the Kbar basis vectors."""
        return self.basis_U @ self.lift_coeffs

    def require_compatible(self):
        if not self.compatible:
            raise CompatibilityError("reduced two-form on Kbar is degenerate")


def _reduced_frame_from_frame(sym, frame, zbar):
    S = frame.S
    BK = frame.basis_K
    V = sym.vertical_basis()
    VK = subspace_intersect(V, BK)
    if VK.shape[1]:
        coeffs = null_space((VK.T @ S.T @ BK))  # omega(u, y) = u.S.y = 0  <=>  y.S.T.u = 0
        U = orth(BK @ coeffs)
    else:
        U = BK
    UV = subspace_intersect(U, V)
    dropped = sym.drop(U)
    Kbar = orth(dropped)
    # Lift each Kbar basis vector into U: minimum-norm coefficients.
    C, *_ = np.linalg.lstsq(dropped, Kbar, rcond=None)
    lifts = U @ C
    G = lifts.T @ S @ lifts
    compatible = numerical_rank(G) == G.shape[0] if G.size else True
    return ReducedFrame(frame.z, zbar, frame, V, VK, U, UV, Kbar, C, G, compatible)


def reduced_frame_at(nh, sym, zbar, qs=None, engine=None):
    """Reduced frame at reduced point zbar, built at its lift with q_S = qs (default 0)."""
    zbar = np.asarray(zbar, dtype=float)
    if zbar.shape != (sym.reduced_dim,):
        raise ContractError(f"reduced point must have length {sym.reduced_dim}")
    z = sym.lift(zbar, qs)
    frame = frame_at(nh, z, engine)
    frame.require_compatible()
    return _reduced_frame_from_frame(sym, frame, zbar)


def reduced_frame_from_point(nh, sym, z, engine=None):
    """Reduced frame built at the given unreduced point itself."""
    z = np.asarray(z, dtype=float)
    frame = frame_at(nh, z, engine)
    frame.require_compatible()
    return _reduced_frame_from_frame(sym, frame, sym.project(z))


def reduced_gradient(nh, sym, rframe, engine=None):
    """Gradient of h(zbar) = H(lift zbar) in reduced coordinates."""
    g = np.asarray(diffcore.gradient(nh.sys.H, rframe.z, engine), float)
    return sym.drop(g)


def reduced_distributional_vf(nh, sym, rframe, engine=None):
    """X in Kbar with omega_bar(X, k) = dh(k) for all k in Kbar."""
    rframe.require_compatible()
    gbar = reduced_gradient(nh, sym, rframe, engine)
    x = np.linalg.solve(rframe.gram.T, rframe.basis_Kbar.T @ gbar)
    return rframe.basis_Kbar @ x


def reduced_equation_residual(nh, sym, rframe, X, engine=None):
    """|omega_bar(X, k) - dh(k)| over the Kbar basis."""
    gbar = reduced_gradient(nh, sym, rframe, engine)
    x = rframe.basis_Kbar.T @ X
    return float(np.max(np.abs(rframe.gram.T @ x - rframe.basis_Kbar.T @ gbar), initial=0.0))


def reduced_projection(sym, rframe, w):
    """Push an unreduced vector w down onto Kbar.

    Finds u in U with omega_B(u, y) = omega_B(w, y) for every y in U (unique up
    to U∩V, which drops to zero) and returns drop(u).
    """
    S = rframe.frame.S
    U = rframe.basis_U
    M = U.T @ S.T @ U
    rhs = U.T @ S.T @ np.asarray(w, float)
    c, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return sym.drop(U @ c)


@dataclass
class ReducedFields:
    X_B: np.ndarray  # X^B_Kbar
    X: np.ndarray  # reduced projection of X_H
    X0: np.ndarray
    lifts: list

    @property
    def cmh(self):
        return self.X_B + sum(self.lifts, np.zeros_like(self.X_B))

    @property
    def vanishing(self):
        return self.X0 + sum(self.lifts, np.zeros_like(self.X_B))


def reduced_fields(nh, sym, rframe, engine=None):
    from .dynamics import canonical_vf

    XBbar = reduced_distributional_vf(nh, sym, rframe, engine)
    z = rframe.z
    XB = np.asarray(magnetic_vf(nh.sys.H, nh.sys.beta, z, engine), float)
    XH = np.asarray(canonical_vf(nh.sys.H, z, engine), float)
    Xbar = reduced_projection(sym, rframe, XH)
    X0 = reduced_projection(sym, rframe, XB) - Xbar
    lifts = [reduced_projection(sym, rframe, vertical_lift(m, None, z, engine, base_value=XB)) for m in nh.sys.fiber_maps()]
    return ReducedFields(XBbar, Xbar, X0, lifts)


def reduced_cmh_vf(nh, sym, rframe, engine=None):
    return reduced_fields(nh, sym, rframe, engine).cmh


def reduced_magnetic_vanishing_residual(nh, sym, rframe, engine=None):
    return reduced_fields(nh, sym, rframe, engine).vanishing


def reduced_decomposition_residual(nh, sym, rframe, engine=None):
    f = reduced_fields(nh, sym, rframe, engine)
    return float(np.max(np.abs(f.cmh - f.X - f.vanishing)))


def relatedness_residual(nh, sym, z, which="plain", engine=None):
    """|reduced field at pi(z) - drop(unreduced field at z)|.

    ``plain`` compares X^B_Kbar with X^B_K, ``cmh`` compares the force- and
    control-augmented fields.
    """
    z = np.asarray(z, dtype=float)
    up = distributional_fields(nh, frame_at(nh, z, engine), engine)
    rframe = reduced_frame_at(nh, sym, sym.project(z), engine=engine)
    if which == "plain":
        down = reduced_distributional_vf(nh, sym, rframe, engine)
        ref = up.X_B_K
    elif which == "cmh":
        down = reduced_cmh_vf(nh, sym, rframe, engine)
        ref = up.cmh
    else:
        raise ContractError(f"unknown relatedness kind {which!r}")
    return float(np.max(np.abs(down - sym.drop(ref))))


def vanishing_relation_residual(nh, sym, z, engine=None):
    """|reduced vanishing residual - drop(unreduced vanishing residual)|."""
    z = np.asarray(z, dtype=float)
    up = distributional_fields(nh, frame_at(nh, z, engine), engine)
    rframe = reduced_frame_at(nh, sym, sym.project(z), engine=engine)
    down = reduced_magnetic_vanishing_residual(nh, sym, rframe, engine)
    return float(np.max(np.abs(down - sym.drop(up.vanishing))))


def pushdown_form_residual(sym, rframe):
    """omega_B(u1, u2) vs the reduced pairing of drop(u1), drop(u2), over the U basis."""
    U = rframe.basis_U
    S = rframe.frame.S
    Kbar = rframe.basis_Kbar
    up = U.T @ S @ U
    coords = Kbar.T @ sym.drop(U)
    down = coords.T @ rframe.gram @ coords
    return float(np.max(np.abs(up - down), initial=0.0))


def lift_independence_residual(nh, sym, zbar, qs_a, qs_b, engine=None):
    """Compare reduced two-form and reduced fields built at two different lifts."""
    ra = reduced_frame_at(nh, sym, zbar, qs_a, engine)
    rb = reduced_frame_at(nh, sym, zbar, qs_b, engine)
    # Express both Gram matrices in a common basis (that of ra).
    T = rb.basis_Kbar.T @ ra.basis_Kbar
    gram_gap = float(np.max(np.abs(ra.gram - T.T @ rb.gram @ T), initial=0.0))
    basis_gap = diffcore.same_span_residual(ra.basis_Kbar, rb.basis_Kbar)
    fa, fb = reduced_fields(nh, sym, ra, engine), reduced_fields(nh, sym, rb, engine)
    field_gap = float(np.max(np.abs(fa.cmh - fb.cmh)))
    return max(gram_gap, basis_gap, field_gap)


def reduced_hj1_residual(gamma, nh, sym, q, engine=None):
    """drop(T gamma T pi X_cmh,K(gamma q)) - X^B_Kbar(pi gamma q)."""
    from .hamilton_jacobi import section_tangent

    q = np.asarray(q, dtype=float)
    z = np.asarray(gamma(q), float)
    up = distributional_fields(nh, frame_at(nh, z, engine, check_on_M=False), engine)
    x = up.cmh[: nh.n]
    rframe = reduced_frame_at(nh, sym, sym.project(z), engine=engine)
    return sym.drop(section_tangent(gamma, q, x, engine)) - reduced_distributional_vf(nh, sym, rframe, engine)


def reduced_hj2_residuals(gamma, eps, nh, sym, z, engine=None):
    """(r1, r2) of the reduced Type II equation at z (z on the constraint submanifold)."""
    from .hamilton_jacobi import pulled_back_magnetic_vf, section_tangent

    z = np.asarray(z, dtype=float)
    n = nh.n
    T = np.asarray(diffcore.jacobian(eps, z, engine), float)
    ez = np.asarray(eps(z), float)
    up = distributional_fields(nh, frame_at(nh, ez, engine, check_on_M=False), engine)
    lam_X = sym.drop(section_tangent(gamma, ez[:n], up.cmh[:n], engine))
    rframe = reduced_frame_at(nh, sym, sym.project(ez), engine=engine)
    r1 = lam_X - reduced_distributional_vf(nh, sym, rframe, engine)
    moved = T @ pulled_back_magnetic_vf(nh.sys.H, eps, nh.sys.beta, z, engine, T=T)
    # The projection is taken at the actual image point (lift-independent by invariance).
    rf_here = _reduced_frame_from_frame(sym, frame_at(nh, ez, engine, check_on_M=False), sym.project(ez))
    r2 = reduced_projection(sym, rf_here, moved) - lam_X
    return r1, r2


@dataclass
class CorrespondenceReport:
    unreduced_pass: list
    reduced_pass: list

    @property
    def agreement(self):
        same = [a == b for a, b in zip(self.unreduced_pass, self.reduced_pass)]
        return sum(same) / len(same) if same else 1.0


def hj2_reduction_correspondence(gamma, eps, nh, sym, samples, tol=1e-6, engine=None):
    """Type II verdicts upstairs vs downstairs at every sample."""
    from .nonholonomic import hj2_dist_residuals

    up, down = [], []
    for z in samples:
        r1, r2 = hj2_dist_residuals(gamma, eps, nh, z, engine)
        up.append(bool(np.max(np.abs(r1)) <= tol and np.max(np.abs(r2)) <= tol))
        s1, s2 = reduced_hj2_residuals(gamma, eps, nh, sym, z, engine)
        down.append(bool(np.max(np.abs(s1)) <= tol and np.max(np.abs(s2)) <= tol))
    return CorrespondenceReport(up, down)
