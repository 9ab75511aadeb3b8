"""How far time-t flow maps are from preserving the magnetic two-form.

Compares the free magnetic flow of the Lorentz scenario, which is symplectic
up to integration error, with the re-projected constrained flow of the
magnetic knife edge.  The latter collapses directions normal to the constraint
set, so its residual stays O(1) however short the time.
"""

import numpy as np

from magnomech.dynamics import flow_map, magnetic_vf
from magnomech.hamilton_jacobi import symplectic_matrix_residual
from magnomech.nonholonomic import oracle_flow_map, project_to_M
from magnomech.scenarios import load_builtin


def main():
    rng = np.random.default_rng(42)
    lor = load_builtin("lorentz2d").system
    knife = load_builtin("knife_edge_magnetic").nonholonomic
    print(f"{'time':>6} {'free flow':>11} {'constrained flow':>17}")
    for t in (0.01, 0.05, 0.1, 0.2):
        free = flow_map(lambda z: magnetic_vf(lor.H, lor.beta, z), t, 100)
        cons = oracle_flow_map(knife, t, 20)
        rf = max(symplectic_matrix_residual(free, lor.beta, z) for z in rng.uniform(-1, 1, (3, 4)))
        zk = [project_to_M(knife, z) for z in rng.uniform(-1, 1, (3, 6))]
        rc = max(symplectic_matrix_residual(cons, knife.sys.beta, z) for z in zk)
        print(f"{t:6.2f} {rf:11.2e} {rc:17.2e}")


if __name__ == "__main__":
    main()
