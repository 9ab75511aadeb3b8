"""Vector fields of controlled magnetic Hamiltonian systems and trajectory integration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import diffcore
from .errors import ContractError, IntegrationError
from .symplectic import MagneticField, split, symplectic_matrix


@dataclass(frozen=True)
class PhasePoint:
    q: np.ndarray
    p: np.ndarray

    @classmethod
    def from_array(cls, z):
        q, p = split(np.asarray(z, dtype=float))
        return cls(q.copy(), p.copy())

    def as_array(self):
        return np.concatenate([self.q, self.p])


@dataclass(frozen=True)
class FiberMap:
    """Fiber-preserving map (q, p) -> (q, f(q, p)); ``f`` takes the full phase vector."""

    n: int
    f: Callable

    def __call__(self, z):
        q, _ = split(np.asarray(z))
        return np.concatenate([q, np.asarray(self.f(z))])


@dataclass(frozen=True)
class CmhSystem:
    """Hamiltonian, magnetic field, external force and control law on T*R^n.

    ``force`` and ``control`` may be None, meaning the zero-lift map.
    """

    n: int
    H: Callable
    beta: MagneticField
    force: Optional[FiberMap] = None
    control: Optional[FiberMap] = None

    def __post_init__(self):
        if self.beta.n != self.n:
            raise ContractError(f"magnetic field has n={self.beta.n}, system has n={self.n}")
        for name in ("force", "control"):
            m = getattr(self, name)
            if m is not None and m.n != self.n:
                raise ContractError(f"{name} map has n={m.n}, system has n={self.n}")

    def fiber_maps(self):
        return [m for m in (self.force, self.control) if m is not None]


def magnetic_vf_from_gradient(beta_q, grad):
    """Solve S.T X = grad for S = [[-beta, I], [-I, 0]]."""
    n = grad.shape[0] // 2
    Hq, Hp = grad[:n], grad[n:]
    return np.concatenate([Hp, -Hq + np.asarray(beta_q) @ Hp])


def canonical_vf(H, z, engine=None):
    """(dH/dp, -dH/dq)."""
    g = diffcore.gradient(H, z, engine)
    n = g.shape[0] // 2
    return np.concatenate([g[n:], -g[:n]])


def magnetic_vf(H, beta, z, engine=None):
    """Unique X with omega_B(X, .) = dH."""
    q, _ = split(np.asarray(z))
    return magnetic_vf_from_gradient(beta(q), diffcore.gradient(H, z, engine))


def magnetic_deviation_vf(H, beta, z, engine=None):
    """X^B_H - X_H = (0, beta dH/dp)."""
    q, _ = split(np.asarray(z))
    g = diffcore.gradient(H, z, engine)
    n = beta.n
    return np.concatenate([np.zeros(n), np.asarray(beta(q)) @ g[n:]])


def vertical_lift(fiber_map, base_vf, z, engine=None, base_value=None):
    """Vertical vector (0, Df(z) @ X(z)) for fiber map f and base field X.

    ``base_value`` lets callers reuse an already computed X(z).
    """
    X = base_vf(z) if base_value is None else base_value
    Jf = diffcore.jacobian(fiber_map.f, z, engine)
    return np.concatenate([np.zeros(fiber_map.n), Jf @ X])


def _lifts(sys, z, X, engine):
    total = None
    for m in sys.fiber_maps():
        lift = vertical_lift(m, None, z, engine, base_value=X)
        total = lift if total is None else total + lift
    return total


def cmh_vf(sys, z, engine=None):
    """X^B_H + vlift(F) X^B_H + vlift(u) X^B_H."""
    X = magnetic_vf(sys.H, sys.beta, z, engine)
    lifts = _lifts(sys, z, X, engine)
    return X if lifts is None else X + lifts


def magnetic_vanishing_residual(sys, z, engine=None):
    """X^0 + vlift(F) X^B_H + vlift(u) X^B_H; zero iff the CMH field is canonical."""
    X = magnetic_vf(sys.H, sys.beta, z, engine)
    r = magnetic_deviation_vf(sys.H, sys.beta, z, engine)
    lifts = _lifts(sys, z, X, engine)
    return r if lifts is None else r + lifts


def decomposition_residual(sys, z, engine=None):
    """max |X_cmh - X_H - r| at z."""
    total = cmh_vf(sys, z, engine) - canonical_vf(sys.H, z, engine) - magnetic_vanishing_residual(sys, z, engine)
    return float(np.max(np.abs(np.asarray(total, dtype=float))))


def defining_equation_residuals(sys, z, engine=None):
    """Residuals of i_{X_H} omega = dH, i_{X^B_H} omega_B = dH and the magnetic equation.

    The third compares i_{X^0} omega with i_{X^B_H} (pi^* B), both as covectors.
    """
    z = np.asarray(z, dtype=float)
    n = sys.n
    q = z[:n]
    g = diffcore.gradient(sys.H, z, engine)
    S0 = symplectic_matrix(np.zeros((n, n)))
    b = np.asarray(sys.beta(q), dtype=float)
    SB = symplectic_matrix(b)
    XH = canonical_vf(sys.H, z, engine)
    XB = magnetic_vf(sys.H, sys.beta, z, engine)
    X0 = magnetic_deviation_vf(sys.H, sys.beta, z, engine)
    r_canonical = np.max(np.abs(XH @ S0 - g))
    r_magnetic = np.max(np.abs(XB @ SB - g))
    # pi^* B as a 2n x 2n matrix acts only on the q-blocks.
    piB = np.zeros((2 * n, 2 * n))
    piB[:n, :n] = b
    r_deviation = np.max(np.abs(X0 @ S0 - XB @ piB))
    return float(r_canonical), float(r_magnetic), float(r_deviation)


# ------------------------------------------------------------------ integration


def rk4_step(vf, z, dt):
    k1 = vf(z)
    k2 = vf(z + 0.5 * dt * k1)
    k3 = vf(z + 0.5 * dt * k2)
    k4 = vf(z + dt * k3)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def euler_step(vf, z, dt):
    return z + dt * vf(z)


STEPPERS = {"rk4": rk4_step, "euler": euler_step}


def integrate(vf, z0, dt, steps, method="rk4", post_step=None):
    """Fixed-step trajectory; returns an array of shape (steps + 1, 2n).

    ``post_step`` (optional) maps each new state, e.g. a re-projection.
    """
    if not dt > 0:
        raise ContractError("dt must be positive")
    if steps < 1:
        raise ContractError("steps must be at least 1")
    if method not in STEPPERS:
        raise ContractError(f"unknown method {method!r}")
    step = STEPPERS[method]
    z = np.asarray(z0, dtype=float).copy()
    out = np.empty((steps + 1, z.shape[0]))
    out[0] = z
    for i in range(1, steps + 1):
        try:
            z = step(vf, z, dt)
            if post_step is not None:
                z = post_step(z)
        except (ArithmeticError, np.linalg.LinAlgError) as exc:
            raise IntegrationError(f"integration failed: {exc}", i) from None
        z = np.asarray(z, dtype=float)
        if not np.all(np.isfinite(z)):
            raise IntegrationError("non-finite state", i)
        out[i] = z
    return out


def flow_map(vf, time, substeps=100, method="rk4"):
    """Time-``time`` map of ``vf`` by fixed-step integration; accepts dual inputs."""
    step = STEPPERS[method]
    dt = time / substeps

    def phi(z):
        z = np.asarray(z)
        for _ in range(substeps):
            z = step(vf, z, dt)
        return z

    return phi
