"""Type I residual of the linear primitive under kinetic and energy-compatible Hamiltonians.

For constant beta and gammabar = beta q / 2 the section satisfies d gamma + B = 0,
yet with H = |p|^2 / 2 the residual equals grad(|gammabar|^2 / 2), which grows
linearly in |q|.  Adding the potential -|gammabar|^2 / 2 makes H constant along
the section and the residual vanishes.
"""

import numpy as np

from magnomech.dynamics import CmhSystem
from magnomech.hamilton_jacobi import dgamma_plus_B_residual, hj1_residual
from magnomech.symplectic import MagneticField, OneFormSection


def main():
    beta = np.array([[0.0, -1.0], [1.0, 0.0]])
    field = MagneticField.from_constant(beta)
    gamma = OneFormSection(2, lambda q: 0.5 * beta @ q)
    kinetic = CmhSystem(2, lambda z: 0.5 * z[2:] @ z[2:], field)
    compatible = CmhSystem(2, lambda z: 0.5 * z[2:] @ z[2:] - 0.125 * z[:2] @ z[:2], field)
    print(f"{'|q|':>6} {'dgamma+B':>10} {'kinetic':>10} {'compatible':>11}")
    for r in (0.0, 0.5, 1.0, 2.0, 4.0):
        q = np.array([r / np.sqrt(2), r / np.sqrt(2)])
        rk = np.max(np.abs(hj1_residual(gamma, kinetic, q)))
        rc = np.max(np.abs(hj1_residual(gamma, compatible, q)))
        print(f"{r:6.2f} {dgamma_plus_B_residual(gamma, field, q):10.1e} {rk:10.3e} {rc:11.1e}")


if __name__ == "__main__":
    main()
