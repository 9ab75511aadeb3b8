"""Check suites: residual evaluation over seeded samples, with verdicts.

Each check returns a ``CheckRecord``.  Verdicts:

* ``pass``     residual <= tolerance and no hypothesis flag fired
* ``fail``     residual > tolerance and no hypothesis flag fired
* ``flagged``  a hypothesis of the claim is violated on the samples, so the
               claim says nothing (not counted as a failure)
* ``skipped``  the scenario lacks an input the check needs
* ``info``     a reported quantity with no claim attached

Only ``fail`` makes the exit status nonzero.
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import diffcore
from .dynamics import (
    canonical_vf,
    decomposition_residual,
    defining_equation_residuals,
)
from .equivalence import (
    SystemPair,
    cmh2_residual,
    functoriality_residual,
    lift_symplectic_residual,
    magnetic_correspondence_residual,
    solution_transport_check,
)
from .errors import CompatibilityError, DegeneracyError
from .hamilton_jacobi import (
    compensating_magnetic_field,
    dgamma_plus_B_residual,
    energy_along_section_gradient,
    hj1_identity_residual,
    hj1_residual,
    hj2_residuals,
    symplectic_matrix_residual,
)
from .nonholonomic import (
    bracket_generating_check,
    constraint_norm,
    dgamma_plus_B_on_D_residual,
    dist_decomposition_residual,
    distributional_vf,
    energy_on_D_residual,
    energy_rate,
    frame_at,
    hj1_dist_residual,
    hj2_dist_residuals,
    magnetic_field_in_D_residual,
    multiplier_oracle_vf,
    section_image_residual,
    section_tangent_in_K_residual,
)
from .reduction import (
    hj2_reduction_correspondence,
    invariance_residual,
    lift_independence_residual,
    pushdown_form_residual,
    reduced_decomposition_residual,
    reduced_frame_from_point,
    reduced_hj1_residual,
    relatedness_residual,
    vanishing_relation_residual,
)
from .symplectic import closedness_residual, pullback_identity_residuals, skewness_residual

SUITES = ("lemma34", "hj1", "hj2", "dist", "reduced", "equivalence", "all")
VERDICTS = ("pass", "fail", "flagged", "skipped", "info")

# Sample budgets: cheap checks use the scenario count, checks that
# differentiate a numerically integrated map use fewer.
HEAVY_SAMPLES = 20
MEDIUM_SAMPLES = 50


@dataclass
class CheckRecord:
    check_id: str
    anchor: str
    max_residual: Optional[float]
    tolerance: Optional[float]
    verdict: str
    flags: list = field(default_factory=list)
    samples: int = 0
    note: str = ""
    wall_time: float = 0.0

    def body(self):
        d = asdict(self)
        d.pop("wall_time")
        return d


@dataclass
class Report:
    scenario: str
    suite: str
    seed: int
    engine: str
    records: list

    @property
    def counts(self):
        out = {v: 0 for v in VERDICTS}
        for r in self.records:
            out[r.verdict] += 1
        return out

    @property
    def failed(self):
        return any(r.verdict == "fail" for r in self.records)

    def body(self):
        return {
            "scenario": self.scenario,
            "suite": self.suite,
            "seed": self.seed,
            "engine": self.engine,
            "checks": [r.body() for r in self.records],
            "counts": self.counts,
        }

    def timing(self):
        return {r.check_id: r.wall_time for r in self.records}

    def to_json(self):
        return json.dumps({"body": self.body(), "timing": self.timing()}, indent=2, sort_keys=False)

    def body_json(self):
        return json.dumps(self.body(), indent=2)

    def lines(self):
        width = max((len(r.check_id) for r in self.records), default=10)
        out = []
        for r in self.records:
            res = "-" if r.max_residual is None else f"{r.max_residual:.3e}"
            tol = "-" if r.tolerance is None else f"{r.tolerance:.1e}"
            extra = f"  [{'; '.join(r.flags)}]" if r.flags else ""
            if r.note:
                extra += f"  ({r.note})"
            out.append(f"{r.verdict.upper():8s} {r.check_id:{width}s}  res={res} tol={tol} n={r.samples}{extra}")
        c = self.counts
        out.append(
            f"{self.scenario}/{self.suite}: "
            + ", ".join(f"{c[v]} {v}" for v in VERDICTS if c[v])
        )
        return out


def _verdict(residual, tol, flags):
    if flags:
        return "flagged"
    return "pass" if residual <= tol else "fail"


def _max(values):
    values = [float(np.max(np.abs(np.asarray(v, dtype=float)), initial=0.0)) for v in values]
    return max(values, default=0.0)


@dataclass
class _Ctx:
    scn: object
    seed: int
    tol: Optional[float]
    engine: diffcore.DerivativeEngine

    def rng(self, check_id):
        return np.random.default_rng([self.seed, zlib.crc32(check_id.encode())])

    def tolerance(self, default):
        return default if self.tol is None else self.tol

    def count(self, limit=None):
        c = self.scn.sampling.count
        return c if limit is None else min(c, limit)


# Each check: (id, anchor, needs, default tol, function(ctx, rng, tol) -> dict)
# The function returns {"residual": float, "samples": int, "flags": [...], "verdict": optional, "note": optional}.

_REGISTRY: dict = {s: [] for s in SUITES if s != "all"}


def _check(suite, check_id, anchor, tol, needs=()):
    def deco(fn):
        _REGISTRY[suite].append((check_id, anchor, tuple(needs), tol, fn))
        return fn

    return deco


_NEED_TEST = {
    "gamma": lambda s: s.gamma is not None,
    "epsilon": lambda s: s.epsilon is not None,
    "phi": lambda s: s.phi is not None,
    "symmetry": lambda s: s.symmetry is not None,
    "constraints": lambda s: s.has_constraints,
}


def _phase_samples(ctx, rng, count, on_M=False):
    return ctx.scn.sample_z(rng, count, on_M=on_M)


def _section_points(ctx, rng, count):
    return [ctx.scn.gamma(q) for q in ctx.scn.sample_q(rng, count)]


# ----------------------------------------------------------------- lemma34 suite


@_check("lemma34", "lemma34.closedness", "magnetic two-form is closed", 1e-10)
def _closedness(ctx, rng, tol):
    qs = ctx.scn.sample_q(rng, ctx.count())
    b = ctx.scn.system.beta
    res = max(max(closedness_residual(b, q, ctx.engine), skewness_residual(b, q)) for q in qs)
    return {"residual": res, "samples": len(qs)}


@_check("lemma34", "lemma34.canonical_equation", "i_X omega = dH for the canonical field", 1e-10)
def _canonical_eq(ctx, rng, tol):
    zs = _phase_samples(ctx, rng, ctx.count())
    res = max(defining_equation_residuals(ctx.scn.system, z, ctx.engine)[0] for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("lemma34", "lemma34.magnetic_equation", "i_X omega_B = dH for the magnetic field", 1e-10)
def _magnetic_eq(ctx, rng, tol):
    zs = _phase_samples(ctx, rng, ctx.count())
    res = max(defining_equation_residuals(ctx.scn.system, z, ctx.engine)[1] for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("lemma34", "lemma34.deviation_equation", "deviation field balances the pulled-back magnetic term", 1e-10)
def _deviation_eq(ctx, rng, tol):
    zs = _phase_samples(ctx, rng, ctx.count())
    res = max(defining_equation_residuals(ctx.scn.system, z, ctx.engine)[2] for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("lemma34", "lemma34.decomposition", "controlled field = canonical field + vanishing residual", 1e-10)
def _decomposition(ctx, rng, tol):
    zs = _phase_samples(ctx, rng, ctx.count())
    res = max(decomposition_residual(ctx.scn.system, z, ctx.engine) for z in zs)
    return {"residual": res, "samples": len(zs)}


def _pullback_identity(ctx, rng, which):
    scn = ctx.scn
    count = ctx.count()
    zs = _phase_samples(ctx, rng, count)
    vs = rng.standard_normal((count, 2 * scn.n))
    ws = rng.standard_normal((count, 2 * scn.n))
    res = 0.0
    for z, v, w in zip(zs, vs, ws):
        res = max(res, pullback_identity_residuals(scn.gamma, scn.system.beta, z, v, w, ctx.engine)[which])
    return {"residual": res, "samples": count}


@_check("lemma34", "lemma34.pullback_pairing", "fiber projection pulls omega_B back to -(dgamma + B) on base vectors", 1e-8, ["gamma"])
def _pullback_pairing(ctx, rng, tol):
    return _pullback_identity(ctx, rng, 0)


@_check("lemma34", "lemma34.section_pullback", "section pulls omega_B back to -(dgamma + B)", 1e-8, ["gamma"])
def _section_pullback(ctx, rng, tol):
    return _pullback_identity(ctx, rng, 1)


# ------------------------------------------------------------------- hj1 suite


def _hj1_data(ctx, rng, tol):
    scn = ctx.scn
    qs = scn.sample_q(rng, ctx.count())
    eq, dgb, energy = [], [], []
    for q in qs:
        eq.append(_max([hj1_residual(scn.gamma, scn.system, q, ctx.engine)]))
        dgb.append(dgamma_plus_B_residual(scn.gamma, scn.system.beta, q, ctx.engine))
        energy.append(_max([energy_along_section_gradient(scn.gamma, scn.system.H, q, ctx.engine)]))
    return qs, np.array(eq), np.array(dgb), np.array(energy)


@_check("hj1", "hj1.identity", "type I residual splits into energy gradient minus (dgamma + B) dH/dp", 1e-8, ["gamma"])
def _hj1_identity(ctx, rng, tol):
    qs = ctx.scn.sample_q(rng, ctx.count())
    res = max(hj1_identity_residual(ctx.scn.gamma, ctx.scn.system, q, ctx.engine) for q in qs)
    return {"residual": res, "samples": len(qs)}


@_check("hj1", "hj1.equation", "section with dgamma = -B and constant energy solves type I", 1e-8, ["gamma"])
def _hj1_equation(ctx, rng, tol):
    qs, eq, dgb, energy = _hj1_data(ctx, rng, tol)
    flags = []
    if dgb.max() > tol:
        flags.append("dgamma + B is nonzero")
    if energy.max() > tol:
        flags.append("H is not constant along the section")
    return {"residual": float(eq.max()), "samples": len(qs), "flags": flags}


@_check("hj1", "hj1.necessity_probe", "share of samples solving type I while dgamma + B is nonzero (reported only)", None, ["gamma"])
def _hj1_necessity(ctx, rng, tol):
    cls_tol = ctx.tolerance(1e-8)
    qs, eq, dgb, energy = _hj1_data(ctx, rng, cls_tol)
    rate = float(np.mean((eq <= cls_tol) & (dgb > cls_tol)))
    return {"residual": rate, "samples": len(qs), "verdict": "info"}


@_check("hj1", "hj1.compensating_field", "rebuilt field B = -dgamma is closed", 1e-10, ["gamma"])
def _hj1_comp_closed(ctx, rng, tol):
    beta = compensating_magnetic_field(ctx.scn.gamma, ctx.engine)
    qs = ctx.scn.sample_q(rng, ctx.count(MEDIUM_SAMPLES))
    res = max(closedness_residual(beta, q, ctx.engine) for q in qs)
    return {"residual": res, "samples": len(qs)}


@_check("hj1", "hj1.compensated_equation", "type I holds for the system rebuilt with B = -dgamma", 1e-8, ["gamma"])
def _hj1_comp_eq(ctx, rng, tol):
    from .dynamics import CmhSystem

    scn = ctx.scn
    beta = compensating_magnetic_field(scn.gamma, ctx.engine)
    sys = CmhSystem(scn.n, scn.system.H, beta, scn.system.force, scn.system.control)
    qs = scn.sample_q(rng, ctx.count(MEDIUM_SAMPLES))
    res = _max(hj1_residual(scn.gamma, sys, q, ctx.engine) for q in qs)
    energy = _max(energy_along_section_gradient(scn.gamma, sys.H, q, ctx.engine) for q in qs)
    flags = ["H is not constant along the section"] if energy > tol else []
    return {"residual": res, "samples": len(qs), "flags": flags}


# ------------------------------------------------------------------- hj2 suite


def _hj2_data(ctx, rng):
    scn = ctx.scn
    zs = _section_points(ctx, rng, ctx.count(HEAVY_SAMPLES))
    r1s, r2s, sym = [], [], []
    for z in zs:
        r1, r2 = hj2_residuals(scn.gamma, scn.epsilon, scn.system, z, ctx.engine)
        r1s.append(_max([r1]))
        r2s.append(_max([r2]))
        sym.append(symplectic_matrix_residual(scn.epsilon, scn.system.beta, z, ctx.engine))
    return zs, np.array(r1s), np.array(r2s), np.array(sym)


@_check("hj2", "hj2.symplectic_map", "phase map preserves omega_B", 1e-6, ["gamma", "epsilon"])
def _hj2_symplectic(ctx, rng, tol):
    zs = _section_points(ctx, rng, ctx.count(HEAVY_SAMPLES))
    res = max(symplectic_matrix_residual(ctx.scn.epsilon, ctx.scn.system.beta, z, ctx.engine) for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("hj2", "hj2.biconditional", "type II first and second equations agree (verdict disagreement rate)", 0.0, ["gamma", "epsilon"])
def _hj2_bicond(ctx, rng, tol):
    cls_tol = ctx.tolerance(1e-6)
    zs, r1, r2, sym = _hj2_data(ctx, rng)
    disagree = np.mean((r1 <= cls_tol) != (r2 <= cls_tol))
    flags = ["phase map is not symplectic"] if sym.max() > cls_tol else []
    note = f"max r1={r1.max():.3e}, max r2={r2.max():.3e}"
    return {"residual": float(disagree), "samples": len(zs), "flags": flags, "note": note, "tol_override": 0.0}


# ------------------------------------------------------------------ dist suite


def _on_M(ctx, rng, limit=None):
    return _phase_samples(ctx, rng, ctx.count(limit), on_M=True)


@_check("dist", "dist.compatibility", "K has full expected rank and omega_B is nondegenerate on K", 0.0, ["constraints"])
def _dist_compat(ctx, rng, tol):
    zs = _on_M(ctx, rng)
    bad = 0
    for z in zs:
        fr = frame_at(ctx.scn.nonholonomic, z, ctx.engine)
        bad += not (fr.admissible and fr.compatible)
    return {"residual": bad / len(zs), "samples": len(zs)}


@_check("dist", "dist.oracle_agreement", "distributional field matches the Lagrange multiplier formulation", 1e-8, ["constraints"])
def _dist_oracle(ctx, rng, tol):
    nh = ctx.scn.nonholonomic
    zs = _on_M(ctx, rng)
    res = _max(distributional_vf(nh, frame_at(nh, z, ctx.engine), ctx.engine) - multiplier_oracle_vf(nh, z, ctx.engine) for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("dist", "dist.projected_field", "distributional field equals tau_K of the magnetic field", 1e-9, ["constraints"])
def _dist_projection(ctx, rng, tol):
    from .dynamics import magnetic_vf

    nh = ctx.scn.nonholonomic
    zs = _on_M(ctx, rng)
    worst = 0.0
    for z in zs:
        fr = frame_at(nh, z, ctx.engine)
        XB = np.asarray(magnetic_vf(nh.sys.H, nh.sys.beta, z, ctx.engine), float)
        worst = max(worst, _max([distributional_vf(nh, fr, ctx.engine) - fr.tau_K @ XB]))
    return {"residual": worst, "samples": len(zs)}


@_check("dist", "dist.decomposition", "distributional controlled field = projected canonical field + vanishing residual", 1e-10, ["constraints"])
def _dist_decomp(ctx, rng, tol):
    nh = ctx.scn.nonholonomic
    zs = _on_M(ctx, rng)
    res = max(dist_decomposition_residual(nh, frame_at(nh, z, ctx.engine), ctx.engine) for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("dist", "dist.magnetic_field_in_D", "on M the magnetic field projects into D", 1e-8, ["constraints"])
def _dist_field_in_D(ctx, rng, tol):
    nh = ctx.scn.nonholonomic
    zs = _on_M(ctx, rng)
    res = max(magnetic_field_in_D_residual(nh, z, ctx.engine) for z in zs)
    off = max(constraint_norm(nh, z) for z in zs)
    flags = ["sample points are off M"] if off > 1e-8 else []
    return {"residual": res, "samples": len(zs), "flags": flags}


@_check("dist", "dist.energy_rate", "energy is conserved by the distributional magnetic field", 1e-10, ["constraints"])
def _dist_energy(ctx, rng, tol):
    nh = ctx.scn.nonholonomic
    zs = _on_M(ctx, rng)
    res = max(abs(energy_rate(nh, frame_at(nh, z, ctx.engine), ctx.engine)) for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("dist", "dist.bracket_generating", "bracket-generating rank of D at depth 2 (reported only)", None, ["constraints"])
def _dist_bracket(ctx, rng, tol):
    q0 = ctx.scn.sample_q(rng, 1)[0]
    ok, rank = bracket_generating_check(ctx.scn.nonholonomic.dist, q0, 2, ctx.engine)
    return {"residual": float(rank), "samples": 1, "verdict": "info", "note": f"generating={ok} rank={rank}"}


def _dist_hj1_flags(ctx, qs, tol):
    scn = ctx.scn
    nh = scn.nonholonomic
    flags = []
    if max(dgamma_plus_B_on_D_residual(scn.gamma, nh.sys.beta, nh.dist, q, ctx.engine) for q in qs) > tol:
        flags.append("dgamma + B is nonzero on D")
    if max(energy_on_D_residual(scn.gamma, nh, q, ctx.engine) for q in qs) > tol:
        flags.append("H o gamma is not constant along D")
    if max(section_image_residual(scn.gamma, nh, q) for q in qs) > tol:
        flags.append("section leaves M")
    if max(section_tangent_in_K_residual(scn.gamma, nh, q, engine=ctx.engine) for q in qs) > tol:
        flags.append("section tangent of D leaves K")
    return flags


@_check("dist", "dist.hj1", "constrained type I holds under the distributional hypotheses", 1e-7, ["constraints", "gamma"])
def _dist_hj1(ctx, rng, tol):
    scn = ctx.scn
    qs = scn.sample_q(rng, ctx.count(MEDIUM_SAMPLES))
    res = _max(hj1_dist_residual(scn.gamma, scn.nonholonomic, q, ctx.engine) for q in qs)
    return {"residual": res, "samples": len(qs), "flags": _dist_hj1_flags(ctx, qs, tol)}


def _eps_flags(ctx, zs, tol):
    scn = ctx.scn
    flags = []
    if max(symplectic_matrix_residual(scn.epsilon, scn.system.beta, z, ctx.engine) for z in zs) > tol:
        flags.append("phase map is not symplectic")
    if max(constraint_norm(scn.nonholonomic, np.asarray(scn.epsilon(z), float)) for z in zs) > 1e-8:
        flags.append("phase map leaves M")
    return flags


@_check("dist", "dist.hj2_biconditional", "constrained type II equations agree (verdict disagreement rate)", 0.0, ["constraints", "gamma", "epsilon"])
def _dist_hj2(ctx, rng, tol):
    cls_tol = ctx.tolerance(1e-7)
    scn = ctx.scn
    zs = _section_points(ctx, rng, ctx.count(HEAVY_SAMPLES))
    r1s, r2s = [], []
    for z in zs:
        r1, r2 = hj2_dist_residuals(scn.gamma, scn.epsilon, scn.nonholonomic, z, ctx.engine)
        r1s.append(_max([r1]))
        r2s.append(_max([r2]))
    r1s, r2s = np.array(r1s), np.array(r2s)
    disagree = float(np.mean((r1s <= cls_tol) != (r2s <= cls_tol)))
    note = f"max r1={r1s.max():.3e}, max r2={r2s.max():.3e}"
    return {"residual": disagree, "samples": len(zs), "flags": _eps_flags(ctx, zs, cls_tol), "note": note, "tol_override": 0.0}


# --------------------------------------------------------------- reduced suite


def _reduced_points(ctx, rng, limit=MEDIUM_SAMPLES):
    return _phase_samples(ctx, rng, ctx.count(limit), on_M=True)


@_check("reduced", "reduced.invariance", "system data are invariant under cyclic translations", 1e-12, ["symmetry"])
def _red_invariance(ctx, rng, tol):
    scn = ctx.scn
    zs = _phase_samples(ctx, rng, ctx.count())
    shifts = [rng.uniform(-3, 3, scn.symmetry.s) for _ in range(3)]
    res = invariance_residual(scn.nonholonomic, scn.symmetry, zs, shifts, include_gamma=scn.gamma)
    return {"residual": res, "samples": len(zs)}


@_check("reduced", "reduced.related_magnetic", "reduced and unreduced distributional fields are pi-related", 1e-8, ["symmetry"])
def _red_related_plain(ctx, rng, tol):
    zs = _reduced_points(ctx, rng)
    res = max(relatedness_residual(ctx.scn.nonholonomic, ctx.scn.symmetry, z, "plain", ctx.engine) for z in zs)
    return {"residual": res, "samples": len(zs)}


def _cyclic_momentum_forcing(ctx, zs):
    """Largest component of force/control along cyclic momenta."""
    scn = ctx.scn
    idx = list(scn.symmetry.cyclic)
    worst = 0.0
    for m in scn.system.fiber_maps():
        for z in zs:
            worst = max(worst, float(np.max(np.abs(np.asarray(m.f(z), float)[idx]), initial=0.0)))
    return worst


@_check("reduced", "reduced.related_controlled", "reduced and unreduced controlled fields are pi-related", 1e-8, ["symmetry"])
def _red_related_cmh(ctx, rng, tol):
    zs = _reduced_points(ctx, rng)
    res = max(relatedness_residual(ctx.scn.nonholonomic, ctx.scn.symmetry, z, "cmh", ctx.engine) for z in zs)
    flags = ["force or control acts along cyclic momenta"] if _cyclic_momentum_forcing(ctx, zs) > tol else []
    return {"residual": res, "samples": len(zs), "flags": flags}


@_check("reduced", "reduced.pushdown_form", "omega_B on U equals the reduced two-form on dropped vectors", 1e-10, ["symmetry"])
def _red_pushdown(ctx, rng, tol):
    scn = ctx.scn
    zs = _reduced_points(ctx, rng)
    res = max(pushdown_form_residual(scn.symmetry, reduced_frame_from_point(scn.nonholonomic, scn.symmetry, z, ctx.engine)) for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("reduced", "reduced.lift_independence", "reduced two-form and fields do not depend on the chosen lift", 1e-9, ["symmetry"])
def _red_lift(ctx, rng, tol):
    scn = ctx.scn
    sym = scn.symmetry
    zs = _reduced_points(ctx, rng)
    res = 0.0
    for z in zs:
        a, b = rng.uniform(-3, 3, sym.s), rng.uniform(-3, 3, sym.s)
        res = max(res, lift_independence_residual(scn.nonholonomic, sym, sym.project(z), a, b, ctx.engine))
    return {"residual": res, "samples": len(zs)}


@_check("reduced", "reduced.decomposition", "reduced controlled field = reduced canonical field + reduced vanishing residual", 1e-10, ["symmetry"])
def _red_decomp(ctx, rng, tol):
    scn = ctx.scn
    zs = _reduced_points(ctx, rng)
    res = max(
        reduced_decomposition_residual(scn.nonholonomic, scn.symmetry, reduced_frame_from_point(scn.nonholonomic, scn.symmetry, z, ctx.engine), ctx.engine)
        for z in zs
    )
    return {"residual": res, "samples": len(zs)}


@_check("reduced", "reduced.vanishing_relation", "reduced vanishing residual is the dropped unreduced one", 1e-8, ["symmetry"])
def _red_vanishing(ctx, rng, tol):
    scn = ctx.scn
    nh, sym = scn.nonholonomic, scn.symmetry
    zs = _reduced_points(ctx, rng)
    res, outside = 0.0, 0.0
    for z in zs:
        res = max(res, vanishing_relation_residual(nh, sym, z, ctx.engine))
        rf = reduced_frame_from_point(nh, sym, z, ctx.engine)
        tXH = rf.frame.tau_K @ np.asarray(canonical_vf(nh.sys.H, z, ctx.engine), float)
        outside = max(outside, diffcore.span_residual(rf.basis_U, tXH))
    flags = ["projected canonical field leaves U"] if outside > tol else []
    return {"residual": res, "samples": len(zs), "flags": flags}


@_check("reduced", "reduced.hj1", "reduced type I holds under the distributional hypotheses", 1e-7, ["symmetry", "gamma"])
def _red_hj1(ctx, rng, tol):
    scn = ctx.scn
    qs = scn.sample_q(rng, ctx.count(MEDIUM_SAMPLES))
    res = _max(reduced_hj1_residual(scn.gamma, scn.nonholonomic, scn.symmetry, q, ctx.engine) for q in qs)
    return {"residual": res, "samples": len(qs), "flags": _dist_hj1_flags(ctx, qs, tol)}


@_check("reduced", "reduced.hj2_correspondence", "type II verdicts agree before and after reduction (disagreement rate)", 0.0, ["symmetry", "gamma", "epsilon"])
def _red_hj2(ctx, rng, tol):
    scn = ctx.scn
    cls_tol = ctx.tolerance(1e-7)
    zs = _section_points(ctx, rng, ctx.count(HEAVY_SAMPLES))
    rep = hj2_reduction_correspondence(scn.gamma, scn.epsilon, scn.nonholonomic, scn.symmetry, zs, cls_tol, ctx.engine)
    note = f"unreduced pass {sum(rep.unreduced_pass)}/{len(zs)}, reduced pass {sum(rep.reduced_pass)}/{len(zs)}"
    return {"residual": 1.0 - rep.agreement, "samples": len(zs), "flags": _eps_flags(ctx, zs, cls_tol), "note": note, "tol_override": 0.0}


# ----------------------------------------------------------- equivalence suite


def _pair(ctx):
    return SystemPair.conjugated(ctx.scn.phi, ctx.scn.system, ctx.engine)


def _phi_is_affine(ctx, rng):
    phi = ctx.scn.phi
    qs = ctx.scn.sample_q(rng, 3)
    J0 = np.asarray(phi.jacobian(qs[0], ctx.engine), float)
    return all(np.max(np.abs(np.asarray(phi.jacobian(q, ctx.engine), float) - J0)) <= 1e-12 for q in qs[1:])


@_check("equivalence", "equivalence.lift_symplectic", "cotangent lift intertwines the magnetic forms", 1e-10, ["phi"])
def _eq_symp(ctx, rng, tol):
    pair = _pair(ctx)
    zs = _phase_samples(ctx, rng, ctx.count(MEDIUM_SAMPLES))
    res = max(lift_symplectic_residual(pair, z, ctx.engine) for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("equivalence", "equivalence.magnetic_fields", "cotangent lift carries magnetic field to magnetic field", 1e-8, ["phi"])
def _eq_mag(ctx, rng, tol):
    pair = _pair(ctx)
    zs = _phase_samples(ctx, rng, ctx.count(MEDIUM_SAMPLES))
    res = max(magnetic_correspondence_residual(pair, z, ctx.engine) for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("equivalence", "equivalence.controlled_fields", "conjugated systems have corresponding controlled fields", 1e-6, ["phi"])
def _eq_cmh2(ctx, rng, tol):
    pair = _pair(ctx)
    zs = _phase_samples(ctx, rng, ctx.count(MEDIUM_SAMPLES))
    res = max(cmh2_residual(pair, z, ctx.engine) for z in zs)
    flags = []
    if ctx.scn.system.fiber_maps() and not _phi_is_affine(ctx, rng):
        flags.append("non-affine diffeomorphism with force or control")
    return {"residual": res, "samples": len(zs), "flags": flags}


@_check("equivalence", "equivalence.functoriality", "lift of a composition is the composition of lifts", 1e-10, ["phi"])
def _eq_functor(ctx, rng, tol):
    phi = ctx.scn.phi
    zs = _phase_samples(ctx, rng, ctx.count(MEDIUM_SAMPLES))
    res = max(functoriality_residual(phi, phi, z, ctx.engine) for z in zs)
    return {"residual": res, "samples": len(zs)}


@_check("equivalence", "equivalence.type1_transport", "type I verdicts survive transport (disagreement)", 0.0, ["phi", "gamma"])
def _eq_t1(ctx, rng, tol):
    cls_tol = ctx.tolerance(1e-6)
    qs = ctx.scn.sample_q(rng, ctx.count(MEDIUM_SAMPLES))
    rep = solution_transport_check(_pair(ctx), qs, ctx.scn.gamma, None, cls_tol, ctx.engine)
    flags = [] if rep.hypotheses_ok else ["systems are not equivalent on the samples"]
    return {"residual": 0.0 if rep.verdicts_match else 1.0, "samples": len(qs), "flags": flags, "note": rep.verdict_pair, "tol_override": 0.0}


@_check("equivalence", "equivalence.type2_transport", "type II verdicts survive transport (disagreement)", 0.0, ["phi", "gamma", "epsilon"])
def _eq_t2(ctx, rng, tol):
    cls_tol = ctx.tolerance(1e-6)
    qs = ctx.scn.sample_q(rng, ctx.count(HEAVY_SAMPLES // 2))
    rep = solution_transport_check(_pair(ctx), qs, ctx.scn.gamma, ctx.scn.epsilon, cls_tol, ctx.engine)
    flags = [] if rep.hypotheses_ok else ["systems are not equivalent on the samples"]
    return {"residual": 0.0 if rep.verdicts_match else 1.0, "samples": len(qs), "flags": flags, "note": rep.verdict_pair, "tol_override": 0.0}


# ---------------------------------------------------------------------- runner


def suite_checks(suite):
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    if suite == "all":
        return [c for s in SUITES if s != "all" for c in _REGISTRY[s]]
    return list(_REGISTRY[suite])


def _run_one(ctx, entry):
    check_id, anchor, needs, default_tol, fn = entry
    missing = [n for n in needs if not _NEED_TEST[n](ctx.scn)]
    if missing:
        return CheckRecord(check_id, anchor, None, None, "skipped", [], 0, "missing input: " + ", ".join(missing))
    tol = None if default_tol is None else ctx.tolerance(default_tol)
    start = time.perf_counter()
    try:
        out = fn(ctx, ctx.rng(check_id), tol if tol is not None else 0.0)
    except (CompatibilityError, DegeneracyError) as exc:
        rec = CheckRecord(check_id, anchor, None, tol, "flagged", [f"degenerate input: {exc}"], 0)
        rec.wall_time = time.perf_counter() - start
        return rec
    if "tol_override" in out:
        tol = out["tol_override"]
    residual = float(out["residual"])
    flags = list(out.get("flags", []))
    verdict = out.get("verdict") or _verdict(residual, tol, flags)
    rec = CheckRecord(check_id, anchor, residual, tol, verdict, flags, int(out["samples"]), out.get("note", ""))
    rec.wall_time = time.perf_counter() - start
    return rec


def run_checks(scn, suite="all", seed=None, tol=None, engine=None):
    """Run a suite on a scenario; records are ordered by check id."""
    engine = engine or diffcore.default_engine()
    seed = scn.sampling.seed if seed is None else int(seed)
    ctx = _Ctx(scn, seed, tol, engine)
    records = [_run_one(ctx, entry) for entry in suite_checks(suite)]
    records.sort(key=lambda r: r.check_id)
    return Report(scn.name, suite, seed, engine.mode, records)
