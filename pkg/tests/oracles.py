"""Reference solutions shared by the tests; none of them call into the package."""

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp


def heisenberg_oracle(t, q0, p0):
    """Positions from the complex closed form for x + iy and quadrature for z."""
    x0, y0, z0 = q0
    hx = p0[0] - y0 / 2 * p0[2]
    hy = p0[1] + x0 / 2 * p0[2]
    hz = -p0[2]
    w = (hx + 1j * hy) * np.exp(-1j * hz * t)
    xy = complex(x0, y0) + (1j * (hx + 1j * hy) / hz) * (np.exp(-1j * hz * t) - 1)
    zdot = 0.5 * (xy.real * w.imag - xy.imag * w.real)
    z = z0 + cumulative_simpson(zdot, x=t, initial=0.0)
    return np.column_stack([xy.real, xy.imag, z])


def heisenberg_ivp(t, q0, p0):
    """Hamilton's equations of (h_X^2 + h_Y^2)/2 written out for the Heisenberg frame."""
    def rhs(_, s):
        x, y, z, px, py, pz = s
        hx = px - y / 2 * pz
        hy = py + x / 2 * pz
        return [hx, hy, -y / 2 * hx + x / 2 * hy,
                -hy * pz / 2, hx * pz / 2, 0.0]
    sol = solve_ivp(rhs, (t[0], t[-1]), [*q0, *p0], method="DOP853", t_eval=t, rtol=1e-13, atol=1e-13)
    return sol.y[:3].T
