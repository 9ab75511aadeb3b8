"""Step-size study for the constrained integrator on the knife edge.

Integrates to t = 1 with rk4 and Euler at several step sizes and compares the
end point with a tight scipy reference of the multiplier formulation.
"""

import numpy as np
from scipy.integrate import solve_ivp

from magnomech.nonholonomic import constraint_norm, integrate_constrained, multiplier_oracle_vf
from magnomech.scenarios import load_builtin


def main():
    nh = load_builtin("knife_edge").nonholonomic
    z0 = np.array([0.0, 0.0, 0.2, np.cos(0.2), np.sin(0.2), 0.7])
    ref = solve_ivp(lambda t, z: multiplier_oracle_vf(nh, z), (0, 1), z0, rtol=1e-12, atol=1e-12).y[:, -1]
    print(f"{'method':>6} {'dt':>8} {'end error':>10} {'order':>6} {'max |c|':>9}")
    for method in ("euler", "rk4"):
        prev = None
        for dt in (0.1, 0.05, 0.025, 0.0125):
            traj = integrate_constrained(nh, z0, dt, int(round(1 / dt)), method)
            err = np.max(np.abs(traj[-1] - ref))
            order = "" if prev is None else f"{np.log2(prev / err):6.2f}"
            cmax = max(constraint_norm(nh, z) for z in traj)
            print(f"{method:>6} {dt:8.4f} {err:10.2e} {order:>6} {cmax:9.1e}")
            prev = err


if __name__ == "__main__":
    main()
