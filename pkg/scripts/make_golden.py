"""Regenerate the golden trajectory files under tests/golden.

The free-particle file is cross-checked against the exact circular solution
before it is written; pass --check to compare against the existing files
instead of overwriting them.
"""

import argparse
from pathlib import Path

import numpy as np

from magnomech.cli import read_trajectory_csv, simulate, write_trajectory_csv
from magnomech.scenarios import load_builtin

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "tests" / "golden"
GOLDEN = {
    "lorentz2d": dict(t_end=2.0, dt=1e-2),
    "knife_edge_magnetic": dict(t_end=1.0, dt=1e-2),
}


def circle(t):
    # unit speed, beta = [[0,-1],[1,0]], start (0,0,1,0): X = (p, (-p2, p1))
    return np.stack([np.sin(t), 1 - np.cos(t), np.cos(t), np.sin(t)], axis=1)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    for name, kw in GOLDEN.items():
        traj = simulate(load_builtin(name), **kw)
        if name == "lorentz2d":
            err = np.max(np.abs(traj.z - circle(traj.t)))
            print(f"{name}: max deviation from exact circle {err:.2e}")
            assert err < 1e-8
        path = GOLDEN_DIR / f"{name}.csv"
        if args.check:
            _, rows = read_trajectory_csv(path)
            fresh = np.column_stack([traj.t, traj.z, traj.constraint_norm, traj.energy])
            print(f"{name}: max deviation from golden {np.max(np.abs(rows - fresh)):.2e}")
        else:
            write_trajectory_csv(traj, path)
            print(f"wrote {path} ({len(traj.t)} rows)")


if __name__ == "__main__":
    main()
