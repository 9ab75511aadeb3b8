"""Scenario files: parsing, validation and construction of system objects.

A scenario is a JSON document with ``schema_version`` 1 and the fields listed
in ``FIELDS``.  Functions are written in the expression language of
``magnomech.expr`` over ``q1..qn`` and ``p1..pn``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import CmhSystem, FiberMap, flow_map, magnetic_vf
from .equivalence import ConfigDiffeo
from .errors import ScenarioError
from .expr import ExpressionError, matrix_function, parse_expression, vector_function
from .nonholonomic import (
    MechanicalLagrangian,
    NonholonomicCmhSystem,
    PfaffianDistribution,
    oracle_flow_map,
    project_to_M,
)
from .reduction import TranslationSymmetry
from .symplectic import MagneticField, OneFormSection

SCHEMA_VERSION = 1
FIELDS = (
    "schema_version",
    "name",
    "n",
    "hamiltonian",
    "magnetic",
    "constraints",
    "lagrangian",
    "force",
    "control",
    "symmetry",
    "gamma",
    "epsilon",
    "phi",
    "sampling",
)
REQUIRED = ("schema_version", "name", "n")
EPSILON_KINDS = ("identity", "map", "flow", "constrained_flow")


@dataclass(frozen=True)
class SamplingSpec:
    seed: int = 42
    count: int = 100
    q_box: float = 2.0
    p_box: float = 2.0
    initial: Optional[tuple] = None


@dataclass
class Scenario:
    """Validated scenario with ready-to-use system objects."""

    name: str
    n: int
    raw: dict
    sampling: SamplingSpec
    system: CmhSystem
    nonholonomic: NonholonomicCmhSystem
    has_constraints: bool
    symmetry: Optional[TranslationSymmetry] = None
    gamma: Optional[OneFormSection] = None
    epsilon: Optional[object] = None
    epsilon_kind: Optional[str] = None
    phi: Optional[ConfigDiffeo] = None
    source: Optional[str] = field(default=None, repr=False)

    @property
    def k(self):
        return self.nonholonomic.k

    def rng(self, stream=0, seed=None):
        base = self.sampling.seed if seed is None else seed
        return np.random.default_rng([base, stream])

    def sample_q(self, rng, count=None):
        count = self.sampling.count if count is None else count
        return rng.uniform(-self.sampling.q_box, self.sampling.q_box, size=(count, self.n))

    def sample_z(self, rng, count=None, on_M=False):
        count = self.sampling.count if count is None else count
        q = rng.uniform(-self.sampling.q_box, self.sampling.q_box, size=(count, self.n))
        p = rng.uniform(-self.sampling.p_box, self.sampling.p_box, size=(count, self.n))
        z = np.hstack([q, p])
        if on_M:
            z = np.array([project_to_M(self.nonholonomic, zi) for zi in z])
        return z

    def initial_state(self):
        """Declared initial point, else the first seeded sample; projected onto M."""
        if self.sampling.initial is not None:
            z = np.array(self.sampling.initial, dtype=float)
        else:
            z = self.sample_z(self.rng(0), 1)[0]
        return project_to_M(self.nonholonomic, z)

    def summary(self):
        parts = [f"n={self.n}", f"k={self.k}"]
        if self.system.beta.is_zero:
            parts.append("beta=0")
        for label, obj in (("gamma", self.gamma), ("epsilon", self.epsilon_kind), ("phi", self.phi)):
            if obj is not None:
                parts.append(label)
        if self.symmetry is not None:
            parts.append("cyclic=" + ",".join(str(a + 1) for a in self.symmetry.cyclic))
        if self.system.force is not None:
            parts.append("force")
        if self.system.control is not None:
            parts.append("control")
        return " ".join(parts)


# ---------------------------------------------------------------- parsing helpers


def _locate(text, snippet):
    """1-based (line, column) of the first occurrence of a JSON string literal."""
    if text is None:
        return None
    needle = json.dumps(snippet)
    idx = text.find(needle)
    if idx < 0:
        return None
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return line, col + 1  # skip the opening quote


class _Ctx:
    def __init__(self, text):
        self.text = text

    def expr(self, value, where, n, phase=True):
        try:
            return parse_expression(value, n, phase)
        except ExpressionError as exc:
            loc = _locate(self.text, value) if isinstance(value, str) else None
            if loc is not None:
                line, col = loc
                where = f"{where} (line {line}, column {col + exc.column - 1})"
            raise ScenarioError(str(exc), where) from None

    def exprs(self, values, where, n, length, phase=True):
        if not isinstance(values, list):
            raise ScenarioError("expected a list of expressions", where)
        if len(values) != length:
            raise ScenarioError(f"expected {length} entries, got {len(values)}", where)
        return [self.expr(v, f"{where}[{i}]", n, phase) for i, v in enumerate(values)]

    def matrix(self, rows, where, n, shape, phase=False):
        if not isinstance(rows, list):
            raise ScenarioError("expected a list of rows", where)
        if len(rows) != shape[0]:
            raise ScenarioError(f"expected {shape[0]} rows, got {len(rows)}", where)
        return [self.exprs(r, f"{where}[{i}]", n, shape[1], phase) for i, r in enumerate(rows)]


def _number(value, where, kind=float, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError("expected a number", where)
    if kind is int and not float(value).is_integer():
        raise ScenarioError("expected an integer", where)
    value = kind(value)
    if positive and not value > 0:
        raise ScenarioError("must be positive", where)
    return value


def _magnetic(ctx, spec, n):
    if spec is None:
        return MagneticField.zero(n)
    if not isinstance(spec, dict) or "matrix" not in spec:
        raise ScenarioError('expected an object with a "matrix" entry', "magnetic")
    unknown = set(spec) - {"matrix", "convention"}
    if unknown:
        raise ScenarioError(f"unknown keys {sorted(unknown)}", "magnetic")
    convention = spec.get("convention", "pairing")
    if convention not in ("pairing", "force"):
        raise ScenarioError('convention must be "pairing" or "force"', "magnetic.convention")
    rows = ctx.matrix(spec["matrix"], "magnetic.matrix", n, (n, n))
    fn, const = matrix_function(rows)
    sign = -1.0 if convention == "force" else 1.0
    if const is not None:
        field_ = MagneticField.from_constant(sign * const)
        if np.max(np.abs(field_.constant + field_.constant.T), initial=0.0) > 1e-12:
            raise ScenarioError("matrix is not skew-symmetric", "magnetic.matrix")
        return field_
    beta = MagneticField(n, (lambda q: fn(q)) if sign > 0 else (lambda q: -fn(q)))
    probe = np.linspace(0.1, 0.7, n)
    b = np.asarray(beta(probe), dtype=float)
    if np.max(np.abs(b + b.T)) > 1e-12:
        raise ScenarioError("matrix is not skew-symmetric", "magnetic.matrix")
    return beta


def _lagrangian(ctx, spec, n):
    if spec is None:
        return MechanicalLagrangian.identity_mass(n), False
    if not isinstance(spec, dict):
        raise ScenarioError("expected an object", "lagrangian")
    unknown = set(spec) - {"mass", "potential"}
    if unknown:
        raise ScenarioError(f"unknown keys {sorted(unknown)}", "lagrangian")
    if "mass" in spec:
        rows = ctx.matrix(spec["mass"], "lagrangian.mass", n, (n, n))
        mass_fn, _ = matrix_function(rows)
    else:
        eye = np.eye(n)
        mass_fn = lambda q: eye
    potential = None
    if spec.get("potential") is not None:
        V = ctx.expr(spec["potential"], "lagrangian.potential", n, phase=False)
        potential = lambda q: V(q)
    return MechanicalLagrangian(n, mass_fn, potential), True


def _fiber_map(ctx, spec, where, n):
    if spec is None:
        return None
    return FiberMap(n, vector_function(ctx.exprs(spec, where, n, n)))


def _sampling(spec, n):
    if spec is None:
        return SamplingSpec()
    if not isinstance(spec, dict):
        raise ScenarioError("expected an object", "sampling")
    unknown = set(spec) - {"seed", "count", "box", "q_box", "p_box", "initial"}
    if unknown:
        raise ScenarioError(f"unknown keys {sorted(unknown)}", "sampling")
    box = _number(spec.get("box", 2.0), "sampling.box", positive=True)
    initial = spec.get("initial")
    if initial is not None:
        if not isinstance(initial, list) or len(initial) != 2 * n:
            raise ScenarioError(f"expected a list of {2 * n} numbers", "sampling.initial")
        initial = tuple(_number(v, f"sampling.initial[{i}]") for i, v in enumerate(initial))
    return SamplingSpec(
        seed=_number(spec.get("seed", 42), "sampling.seed", int),
        count=_number(spec.get("count", 100), "sampling.count", int, positive=True),
        q_box=_number(spec.get("q_box", box), "sampling.q_box", positive=True),
        p_box=_number(spec.get("p_box", box), "sampling.p_box", positive=True),
        initial=initial,
    )


def _epsilon(ctx, spec, n, system, nh):
    if spec is None:
        return None, None
    if not isinstance(spec, dict) or spec.get("kind") not in EPSILON_KINDS:
        raise ScenarioError(f"kind must be one of {list(EPSILON_KINDS)}", "epsilon.kind")
    kind = spec["kind"]
    allowed = {"identity": {"kind"}, "map": {"kind", "components"}}.get(kind, {"kind", "time", "substeps"})
    unknown = set(spec) - allowed
    if unknown:
        raise ScenarioError(f"unknown keys {sorted(unknown)}", "epsilon")
    if kind == "identity":
        return (lambda z: z), kind
    if kind == "map":
        comps = ctx.exprs(spec.get("components"), "epsilon.components", n, 2 * n)
        return vector_function(comps), kind
    time = _number(spec.get("time"), "epsilon.time", positive=True)
    substeps = _number(spec.get("substeps", 100), "epsilon.substeps", int, positive=True)
    if kind == "flow":
        return flow_map(lambda z: magnetic_vf(system.H, system.beta, z), time, substeps), kind
    return oracle_flow_map(nh, time, substeps), kind


def _phi(ctx, spec, n):
    if spec is None:
        return None
    if not isinstance(spec, dict) or set(spec) != {"map", "inverse"}:
        raise ScenarioError('expected an object with exactly "map" and "inverse"', "phi")
    fwd = vector_function(ctx.exprs(spec["map"], "phi.map", n, n, phase=False))
    inv = vector_function(ctx.exprs(spec["inverse"], "phi.inverse", n, n, phase=False))
    return ConfigDiffeo(n, fwd, inv)


def scenario_from_dict(data, text=None):
    """Validate a decoded scenario document and build its objects."""
    ctx = _Ctx(text)
    if not isinstance(data, dict):
        raise ScenarioError("top level must be a JSON object", "$")
    unknown = [k for k in data if k not in FIELDS]
    if unknown:
        raise ScenarioError(f"unknown top-level field(s) {unknown}", "$")
    for key in REQUIRED:
        if key not in data:
            raise ScenarioError("missing required field", key)
    if data["schema_version"] != SCHEMA_VERSION:
        raise ScenarioError(
            f"unsupported schema version {data['schema_version']!r} (supported: {SCHEMA_VERSION})", "schema_version"
        )
    name = data["name"]
    if not isinstance(name, str) or not name:
        raise ScenarioError("expected a non-empty string", "name")
    n = _number(data["n"], "n", int, positive=True)

    beta = _magnetic(ctx, data.get("magnetic"), n)
    lagrangian, has_lagrangian = _lagrangian(ctx, data.get("lagrangian"), n)
    if data.get("hamiltonian") is not None:
        Hexpr = ctx.expr(data["hamiltonian"], "hamiltonian", n)
        H = lambda z: Hexpr(z)
    elif has_lagrangian:
        H = lagrangian.hamiltonian
    else:
        raise ScenarioError('either "hamiltonian" or "lagrangian" is required', "hamiltonian")

    rows = data.get("constraints") or []
    if not isinstance(rows, list):
        raise ScenarioError("expected a list of rows", "constraints")
    parsed_rows = [ctx.exprs(r, f"constraints[{i}]", n, n, phase=False) for i, r in enumerate(rows)]
    if parsed_rows:
        A_fn, _ = matrix_function(parsed_rows)
        dist = PfaffianDistribution(n, len(parsed_rows), A_fn)
    else:
        dist = PfaffianDistribution.unconstrained(n)

    force = _fiber_map(ctx, data.get("force"), "force", n)
    control = _fiber_map(ctx, data.get("control"), "control", n)
    system = CmhSystem(n, H, beta, force, control)
    nh = NonholonomicCmhSystem(system, dist, lagrangian)

    symmetry = None
    if data.get("symmetry") is not None:
        spec = data["symmetry"]
        if not isinstance(spec, dict) or set(spec) != {"cyclic"} or not isinstance(spec["cyclic"], list):
            raise ScenarioError('expected {"cyclic": [indices]}', "symmetry")
        idx = [_number(a, f"symmetry.cyclic[{i}]", int) for i, a in enumerate(spec["cyclic"])]
        if any(not 1 <= a <= n for a in idx) or len(set(idx)) != len(idx):
            raise ScenarioError(f"indices must be distinct and within 1..{n}", "symmetry.cyclic")
        symmetry = TranslationSymmetry(n, tuple(a - 1 for a in idx))

    gamma = None
    if data.get("gamma") is not None:
        comps = ctx.exprs(data["gamma"], "gamma", n, n, phase=False)
        gamma = OneFormSection(n, vector_function(comps))

    eps, eps_kind = _epsilon(ctx, data.get("epsilon"), n, system, nh)
    phi = _phi(ctx, data.get("phi"), n)
    sampling = _sampling(data.get("sampling"), n)

    scn = Scenario(
        name, n, data, sampling, system, nh, bool(parsed_rows), symmetry, gamma, eps, eps_kind, phi, text
    )
    _validate_finite(scn)
    return scn


def _validate_finite(scn):
    """Evaluate every ingredient at a few box points; reject non-finite values."""
    rng = np.random.default_rng(0)
    pts = scn.sample_z(rng, 3)
    for z in pts:
        q = z[: scn.n]
        checks = [("hamiltonian", lambda: scn.system.H(z)), ("magnetic", lambda: scn.system.beta(q))]
        if scn.has_constraints:
            checks.append(("constraints", lambda: scn.nonholonomic.dist(q)))
        if scn.gamma is not None:
            checks.append(("gamma", lambda: scn.gamma.gammabar(q)))
        for label, m in (("force", scn.system.force), ("control", scn.system.control)):
            if m is not None:
                checks.append((label, lambda m=m: m.f(z)))
        for label, fn in checks:
            with np.errstate(all="ignore"):
                val = np.asarray(fn(), dtype=float)
            if not np.all(np.isfinite(val)):
                raise ScenarioError("evaluates to a non-finite value on the sampling box", label)


def parse_scenario(path):
    """Read and validate a scenario file (or a builtin scenario name)."""
    p = Path(path)
    if not p.exists():
        builtin = builtin_path(str(path))
        if builtin is None:
            raise ScenarioError("no such file or builtin scenario", str(path))
        p = builtin
    text = p.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", str(path)) from None
    return scenario_from_dict(data, text)


def _data_dir():
    return resources.files("magnomech") / "data"


def builtin_names():
    return sorted(p.name[: -len(".json")] for p in _data_dir().iterdir() if p.name.endswith(".json"))


def builtin_path(name):
    candidate = _data_dir() / f"{name}.json"
    return Path(str(candidate)) if candidate.is_file() else None


def load_builtin(name):
    path = builtin_path(name)
    if path is None:
        raise ScenarioError(f"unknown builtin scenario {name!r}", "name")
    return parse_scenario(path)
