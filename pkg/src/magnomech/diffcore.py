"""Forward-mode dual numbers, derivative helpers and small dense linear algebra.

Every differential object in the package (gradients of Hamiltonians, tangent
maps of sections and phase maps, exterior derivatives) is computed here.  The
dual arithmetic is nestable: a Jacobian of a map that itself calls
``gradient`` works, because every seeding gets a fresh tag and arithmetic
between duals of different tags treats the older one as a constant.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, DegeneracyError, NumericDomainError

RANK_RTOL = 1e-10
ENV_VAR = "MAGNOMECH_DERIV"

_tag_counter = itertools.count(1)
_DEFER = object()


class Dual:
    """Number ``val + d·ε`` with a vector of tangent directions.

    ``val`` is a float or a Dual with a smaller tag; ``d`` is a 1-D array
    (float or object dtype) holding the partials along the seeded directions.
    """

    __slots__ = ("val", "d", "tag")

    def __init__(self, val, d, tag):
        self.val = val
        self.d = d
        self.tag = tag

    # Binary operations return NotImplemented for arrays so numpy broadcasts
    # element by element over object arrays instead.
    def _split(self, other):
        if isinstance(other, Dual):
            if other.tag == self.tag:
                return other.val, other.d
            if other.tag < self.tag:
                return other, 0.0
            return _DEFER
        if isinstance(other, np.ndarray) and other.ndim > 0:
            return None
        return other, 0.0

    def __add__(self, other):
        s = self._split(other)
        if s is None:
            return NotImplemented
        if s is _DEFER:
            return other.__radd__(self)
        return Dual(self.val + s[0], self.d + s[1], self.tag)

    __radd__ = __add__

    def __sub__(self, other):
        s = self._split(other)
        if s is None:
            return NotImplemented
        if s is _DEFER:
            return other.__rsub__(self)
        return Dual(self.val - s[0], self.d - s[1], self.tag)

    def __rsub__(self, other):
        s = self._split(other)
        if s is None:
            return NotImplemented
        if s is _DEFER:
            return other.__sub__(self)
        return Dual(s[0] - self.val, s[1] - self.d, self.tag)

    def __mul__(self, other):
        s = self._split(other)
        if s is None:
            return NotImplemented
        if s is _DEFER:
            return other.__rmul__(self)
        b, db = s
        if isinstance(db, float):
            return Dual(self.val * b, self.d * b, self.tag)
        return Dual(self.val * b, self.d * b + self.val * db, self.tag)

    __rmul__ = __mul__

    def __truediv__(self, other):
        s = self._split(other)
        if s is None:
            return NotImplemented
        if s is _DEFER:
            return other.__rtruediv__(self)
        b, db = s
        inv = 1.0 / b
        val = self.val * inv
        if isinstance(db, float):
            return Dual(val, self.d * inv, self.tag)
        return Dual(val, (self.d - val * db) * inv, self.tag)

    def __rtruediv__(self, other):
        s = self._split(other)
        if s is None:
            return NotImplemented
        if s is _DEFER:
            return other.__truediv__(self)
        a, da = s
        inv = 1.0 / self.val
        val = a * inv
        tan = (da - val * self.d) * inv if not isinstance(da, float) else -val * inv * self.d
        return Dual(val, tan, self.tag)

    def __pow__(self, other):
        s = self._split(other)
        if s is None:
            return NotImplemented
        if s is _DEFER:
            return other.__rpow__(self)
        b, db = s
        if isinstance(db, float):
            if isinstance(b, (int, float, np.integer, np.floating)):
                if b == 0:
                    return Dual(self.val**0, self.d * 0.0, self.tag)
                if b == 1:
                    return Dual(self.val, self.d, self.tag)
                if b == 2:
                    return Dual(self.val * self.val, self.d * (2.0 * self.val), self.tag)
            return Dual(self.val**b, self.d * (b * self.val ** (b - 1)), self.tag)
        return (other * self.log()).exp()

    def __rpow__(self, other):
        s = self._split(other)
        if s is None:
            return NotImplemented
        if s is _DEFER:
            return other.__pow__(self)
        return (self * np.log(s[0])).exp()

    def __neg__(self):
        return Dual(-self.val, -self.d, self.tag)

    def __pos__(self):
        return self

    def __abs__(self):
        return self if primal(self) >= 0 else -self

    # Elementary functions; numpy ufuncs on object arrays dispatch to these.
    def sin(self):
        return Dual(np.sin(self.val), self.d * np.cos(self.val), self.tag)

    def cos(self):
        return Dual(np.cos(self.val), self.d * (-np.sin(self.val)), self.tag)

    def tan(self):
        t = np.tan(self.val)
        return Dual(t, self.d * (1.0 + t * t), self.tag)

    def exp(self):
        e = np.exp(self.val)
        return Dual(e, self.d * e, self.tag)

    def log(self):
        return Dual(np.log(self.val), self.d * (1.0 / self.val), self.tag)

    def sqrt(self):
        r = np.sqrt(self.val)
        return Dual(r, self.d * (0.5 / r), self.tag)

    def arctan(self):
        return Dual(np.arctan(self.val), self.d * (1.0 / (1.0 + self.val * self.val)), self.tag)

    def sinh(self):
        return Dual(np.sinh(self.val), self.d * np.cosh(self.val), self.tag)

    def cosh(self):
        return Dual(np.cosh(self.val), self.d * np.sinh(self.val), self.tag)

    def tanh(self):
        t = np.tanh(self.val)
        return Dual(t, self.d * (1.0 - t * t), self.tag)

    def __lt__(self, other):
        return primal(self) < primal(other)

    def __le__(self, other):
        return primal(self) <= primal(other)

    def __gt__(self, other):
        return primal(self) > primal(other)

    def __ge__(self, other):
        return primal(self) >= primal(other)

    def __float__(self):
        return float(primal(self))

    def __repr__(self):
        return f"Dual({self.val!r}, {self.d!r}, tag={self.tag})"


def primal(x):
    """Strip all dual layers from a scalar or array, returning plain floats."""
    if isinstance(x, Dual):
        return primal(x.val)
    if isinstance(x, np.ndarray) and x.dtype == object:
        return np.array([primal(v) for v in x.ravel()], dtype=float).reshape(x.shape)
    return x


def _as_vector(x):
    x = np.asarray(x)
    if x.ndim != 1:
        raise ContractError(f"expected a 1-D vector, got shape {x.shape}")
    if x.dtype != object:
        x = x.astype(float)
    return x


def _tidy(arr):
    """Convert an object array to float when it holds no duals."""
    arr = np.asarray(arr)
    if arr.dtype == object and not any(isinstance(v, Dual) for v in arr.ravel()):
        return arr.astype(float)
    return arr


def _check_finite(arr, what):
    vals = primal(np.asarray(arr))
    if not np.all(np.isfinite(np.asarray(vals, dtype=float))):
        raise NumericDomainError(f"non-finite {what}")


@dataclass(frozen=True)
class ScalarField:
    """A scalar function on R^arity."""

    arity: int
    eval: Callable

    def __call__(self, x):
        return self.eval(x)


@dataclass(frozen=True)
class VectorMap:
    """A map R^in_dim -> R^out_dim."""

    in_dim: int
    out_dim: int
    eval: Callable

    def __call__(self, x):
        return self.eval(x)


def _expected_dim(f):
    if isinstance(f, ScalarField):
        return f.arity
    if isinstance(f, VectorMap):
        return f.in_dim
    return None


def _seed(x, tag):
    m = x.shape[0]
    eye = np.eye(m)
    xd = np.empty(m, dtype=object)
    for i in range(m):
        xd[i] = Dual(x[i], eye[i], tag)
    return xd


def _extract(y, tag, m):
    if isinstance(y, np.ndarray) and y.ndim == 0:
        y = y.item()
    if isinstance(y, Dual) and y.tag == tag:
        tan = y.d
        if np.ndim(tan) == 0:
            return np.zeros(m) + tan
        return tan
    return np.zeros(m)


@dataclass(frozen=True)
class DerivativeEngine:
    """Derivative backend: exact forward duals or central differences.

    The central-difference step for coordinate i is ``rel_step * (1 + |x_i|)``.
    """

    mode: str = "dual"
    rel_step: float = 1e-6

    def __post_init__(self):
        if self.mode not in ("dual", "fd"):
            raise ContractError(f"unknown derivative mode {self.mode!r}")

    def _steps(self, x):
        return self.rel_step * (1.0 + np.abs(primal(x).astype(float)))

    def gradient(self, f, x):
        x = _as_vector(x)
        dim = _expected_dim(f)
        if dim is not None and dim != x.shape[0]:
            raise ContractError(f"gradient: field arity {dim} but point has dimension {x.shape[0]}")
        m = x.shape[0]
        if self.mode == "dual":
            tag = next(_tag_counter)
            g = _tidy(_extract(f(_seed(x, tag)), tag, m))
        else:
            h = self._steps(x)
            g = np.empty(m, dtype=object if x.dtype == object else float)
            for i in range(m):
                e = np.zeros(m)
                e[i] = h[i]
                g[i] = (f(x + e) - f(x - e)) / (2.0 * h[i])
            g = _tidy(g)
        _check_finite(g, "gradient")
        return g

    def jacobian(self, g, x):
        x = _as_vector(x)
        dim = _expected_dim(g)
        if dim is not None and dim != x.shape[0]:
            raise ContractError(f"jacobian: map input dimension {dim} but point has dimension {x.shape[0]}")
        m = x.shape[0]
        if self.mode == "dual":
            tag = next(_tag_counter)
            y = g(_seed(x, tag))
            ys = np.atleast_1d(np.asarray(y, dtype=object))
            rows = [_extract(v, tag, m) for v in ys]
            jac = np.array(rows, dtype=object).reshape(len(rows), m) if rows else np.zeros((0, m))
            jac = _tidy(jac)
        else:
            h = self._steps(x)
            cols = []
            for i in range(m):
                e = np.zeros(m)
                e[i] = h[i]
                fp = np.atleast_1d(np.asarray(g(x + e)))
                fm = np.atleast_1d(np.asarray(g(x - e)))
                cols.append((fp - fm) / (2.0 * h[i]))
            jac = _tidy(np.stack(cols, axis=1)) if cols else np.zeros((0, 0))
        out_dim = g.out_dim if isinstance(g, VectorMap) else None
        if out_dim is not None and jac.shape[0] != out_dim:
            raise ContractError(f"jacobian: map declared {out_dim} outputs, produced {jac.shape[0]}")
        _check_finite(jac, "jacobian")
        return jac

    def hessian(self, f, x):
        return self.jacobian(lambda y: self.gradient(f, y), x)


def default_engine():
    """Engine selected by the MAGNOMECH_DERIV environment variable (dual by default)."""
    mode = os.environ.get(ENV_VAR, "dual").strip().lower()
    aliases = {"dual": "dual", "forward-dual": "dual", "fd": "fd", "central-difference": "fd"}
    if mode not in aliases:
        raise ContractError(f"{ENV_VAR} must be 'dual' or 'fd', got {mode!r}")
    return DerivativeEngine(aliases[mode])


def gradient(f, x, engine=None):
    """Gradient of a scalar function at x."""
    return (engine or default_engine()).gradient(f, x)


def jacobian(g, x, engine=None):
    """Jacobian (rows = output components) of a vector map at x."""
    return (engine or default_engine()).jacobian(g, x)


def hessian(f, x, engine=None):
    """Second-derivative matrix, computed as the Jacobian of the gradient."""
    return (engine or default_engine()).hessian(f, x)


# ---------------------------------------------------------------- linear algebra


def null_space(A, tol=RANK_RTOL):
    """Orthonormal basis (columns) of ker A, using a relative singular-value cutoff."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)):
        raise NumericDomainError("null_space: non-finite matrix")
    rows, cols = A.shape
    if rows == 0 or cols == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(A)
    rank = numerical_rank_from_singular_values(s, tol)
    return vt[rank:].T.copy()


def numerical_rank_from_singular_values(s, tol=RANK_RTOL):
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def numerical_rank(A, tol=RANK_RTOL):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    return numerical_rank_from_singular_values(np.linalg.svd(A, compute_uv=False), tol)


def orth(B, tol=RANK_RTOL):
    """Orthonormal basis of the column span of B."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.size == 0:
        return np.zeros((B.shape[0], 0))
    u, s, _ = np.linalg.svd(B, full_matrices=False)
    return u[:, : numerical_rank_from_singular_values(s, tol)].copy()


def annihilator(B, tol=RANK_RTOL):
    """Orthonormal basis of the Euclidean orthogonal complement of span(B)."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape[1] == 0:
        return np.eye(B.shape[0])
    return null_space(B.T, tol)


def subspace_intersect(B1, B2, tol=RANK_RTOL):
    """Orthonormal basis of span(B1) ∩ span(B2) via stacked annihilators."""
    B1 = np.atleast_2d(np.asarray(B1, dtype=float))
    B2 = np.atleast_2d(np.asarray(B2, dtype=float))
    if B1.shape[0] != B2.shape[0]:
        raise ContractError("subspace_intersect: bases live in different ambient dimensions")
    stacked = np.vstack([annihilator(B1, tol).T, annihilator(B2, tol).T])
    return null_space(stacked, tol)


def span_residual(B, v):
    """Distance from v (vector or columns) to span(B), for orthonormal B."""
    v = np.asarray(v, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    return float(np.max(np.abs(v - B @ (B.T @ v)), initial=0.0))


def same_span_residual(B1, B2):
    """Symmetric mutual projection residual between two orthonormal bases."""
    if B1.shape[1] != B2.shape[1]:
        return math.inf
    return max(span_residual(B1, B2), span_residual(B2, B1))


def solve(A, b):
    """Dense solve that also accepts object (dual-valued) entries.

    Float inputs go to LAPACK; object inputs use Gaussian elimination with
    partial pivoting on the primal values.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if A.dtype != object and b.dtype != object:
        try:
            return np.linalg.solve(A.astype(float), b.astype(float))
        except np.linalg.LinAlgError as exc:
            raise DegeneracyError(f"singular matrix in solve: {exc}") from None
    n = A.shape[0]
    M = np.array(A, dtype=object)
    rhs = np.array(b, dtype=object).reshape(n, -1)
    for k in range(n):
        piv = max(range(k, n), key=lambda i: abs(float(primal(M[i, k]))))
        if abs(float(primal(M[piv, k]))) == 0.0:
            raise DegeneracyError("singular matrix in solve")
        if piv != k:
            M[[k, piv]] = M[[piv, k]]
            rhs[[k, piv]] = rhs[[piv, k]]
        for i in range(k + 1, n):
            factor = M[i, k] / M[k, k]
            M[i, k:] = M[i, k:] - factor * M[k, k:]
            rhs[i] = rhs[i] - factor * rhs[k]
    x = np.empty_like(rhs)
    for k in range(n - 1, -1, -1):
        acc = rhs[k]
        for j in range(k + 1, n):
            acc = acc - M[k, j] * x[j]
        x[k] = acc / M[k, k]
    return x.reshape(b.shape)


def saddle_solve(K, C, rhs, rhs_c=None, tol=RANK_RTOL):
    """Solve the bordered system [[K, Cᵀ], [C, 0]] [x; λ] = [rhs; rhs_c].

    Returns (x, λ).  Raises DegeneracyError when the bordered matrix is
    numerically singular.
    """
    K = np.asarray(K, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    m, k = K.shape[0], C.shape[0]
    if rhs_c is None:
        rhs_c = np.zeros(k)
    big = np.zeros((m + k, m + k))
    big[:m, :m] = K
    big[:m, m:] = C.T
    big[m:, :m] = C
    if numerical_rank(big, tol) < m + k:
        raise DegeneracyError("saddle system is singular")
    sol = np.linalg.solve(big, np.concatenate([np.asarray(rhs, float), np.asarray(rhs_c, float)]))
    return sol[:m], sol[m:]
