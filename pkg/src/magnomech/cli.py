"""Command-line interface: ``check``, ``simulate`` and ``list-scenarios``.

Exit codes: 0 success, 1 at least one check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import diffcore
from .checks import SUITES, run_checks
from .dynamics import STEPPERS, cmh_vf, integrate
from .errors import ContractError, IntegrationError, MagnomechError, ScenarioError
from .nonholonomic import constraint_norm, integrate_constrained
from .scenarios import builtin_names, load_builtin, parse_scenario

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    constraint_norm: np.ndarray
    energy: np.ndarray

    @property
    def n(self):
        return self.z.shape[1] // 2

    @property
    def max_constraint_norm(self):
        return float(self.constraint_norm.max())

    @property
    def energy_drift(self):
        return float(np.max(np.abs(self.energy - self.energy[0])))


def step_count(t_end, dt):
    """Number of steps; dt must divide t_end up to rounding."""
    if not (dt > 0 and t_end > 0):
        raise ContractError("t_end and dt must be positive")
    steps = int(round(t_end / dt))
    if steps < 1 or abs(steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ContractError(f"dt={dt!r} does not divide t_end={t_end!r}")
    return steps


def simulate(scn, t_end, dt, method="rk4", z0=None, engine=None):
    """Integrate the controlled field of a scenario from its initial state."""
    steps = step_count(t_end, dt)
    nh = scn.nonholonomic
    z0 = scn.initial_state() if z0 is None else np.asarray(z0, float)
    if scn.has_constraints:
        Z = integrate_constrained(nh, z0, dt, steps, method, engine)
    else:
        Z = integrate(lambda z: cmh_vf(scn.system, z, engine), z0, dt, steps, method)
    t = dt * np.arange(steps + 1)
    cn = np.array([constraint_norm(nh, z) for z in Z])
    H = np.array([float(scn.system.H(z)) for z in Z])
    return Trajectory(t, Z, cn, H)


def trajectory_header(n):
    return ["t"] + [f"q{i + 1}" for i in range(n)] + [f"p{i + 1}" for i in range(n)] + ["constraint_norm", "H"]


def write_trajectory_csv(traj, path):
    fmt = lambda v: f"{v:.17g}"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(trajectory_header(traj.n)) + "\n")
        for t, z, c, h in zip(traj.t, traj.z, traj.constraint_norm, traj.energy):
            fh.write(",".join(fmt(v) for v in (t, *z, c, h)) + "\n")
        fh.write(f"# summary,max_constraint_norm={fmt(traj.max_constraint_norm)},energy_drift={fmt(traj.energy_drift)}\n")


def read_trajectory_csv(path):
    """(header, rows) of a trajectory file, skipping the summary line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln and not ln.startswith("#")])
    return header, rows


def _load(ref):
    return parse_scenario(ref) if Path(ref).exists() else load_builtin(ref)


def _cmd_check(args):
    scn = _load(args.file)
    report = run_checks(scn, args.suite, seed=args.seed, tol=args.tol)
    print(f"scenario {scn.name} ({scn.summary()}), suite {args.suite}, seed {report.seed}, engine {report.engine}")
    for line in report.lines():
        print(line)
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_FAIL if report.failed else EXIT_OK


def _cmd_simulate(args):
    scn = _load(args.file)
    traj = simulate(scn, args.t_end, args.dt, args.method)
    write_trajectory_csv(traj, args.out)
    print(f"wrote {len(traj.t)} rows to {args.out}")
    print(f"max constraint norm {traj.max_constraint_norm:.3e}, energy drift {traj.energy_drift:.3e}")
    return EXIT_OK


def _cmd_list(args):
    for name in builtin_names():
        scn = load_builtin(name)
        print(f"{name:26s} {scn.summary()}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="magnomech", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run a check suite on a scenario")
    p.add_argument("file", help="scenario JSON file or builtin name")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--tol", type=float, default=None, help="override every tolerance")
    p.add_argument("--report", default=None, help="write a JSON report here")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("simulate", help="integrate a scenario and write a CSV trajectory")
    p.add_argument("file", help="scenario JSON file or builtin name")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=sorted(STEPPERS), default="rk4")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("list-scenarios", help="list builtin scenarios")
    p.set_defaults(func=_cmd_list)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        diffcore.default_engine()
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ContractError, IntegrationError, MagnomechError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
