"""Uniform time grids and exact exponential-kernel convolutions.

The Picard fixed-point solvers integrate scalar ODEs of the form

    forward:   y' = -a y + f(t),  a > 0
    backward:  s(t) = int_t^inf e^{-k (tau - t)} h(tau) dtau,  k > 0

on a uniform grid. Integrands are piecewise linear between nodes and
the exponential kernel is integrated in closed form, so the only
approximation is the linear interpolation of f and h. The resulting
one-step recurrences are evaluated with scipy.signal.lfilter. The
model's 2x2 blocks are triangular and are chained from these scalars
by the solvers.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter


@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    dt: float

    def __post_init__(self):
        if self.t_max <= 0 or self.dt <= 0 or self.dt > self.t_max:
            raise ValueError("need 0 < dt <= t_max")

    @property
    def times(self):
        n = int(round(self.t_max / self.dt))
        return np.arange(n + 1) * self.dt

    @classmethod
    def default_for(cls, params, dt=1e-2):
        """Horizon long enough that the slowest mode has decayed to ~1e-8."""
        t_max = max(50.0, 20.0 / min(params.alpha, params.mu, params.rho))
        return cls(t_max=t_max, dt=dt)


def conv_forward(a, f, dt, y0=0.0):
    """Solution of y' = -a y + f(t), y(0) = y0, at the nodes carrying f.

    One exact step with piecewise-linear f:
        y_{k+1} = E y_k + w0 f_k + w1 f_{k+1},  E = e^{-a dt},
        S0 = (1 - E)/a,  S1 = dt/a - (1 - E)/a^2,
        w0 = S0 - S1/dt, w1 = S1/dt.
    """
    f = np.asarray(f, dtype=float)
    e = np.exp(-a * dt)
    s0 = (1.0 - e) / a
    s1 = dt / a - (1.0 - e) / a**2
    w0, w1 = s0 - s1 / dt, s1 / dt
    drive = np.empty_like(f)
    drive[0] = y0
    drive[1:] = w0 * f[:-1] + w1 * f[1:]
    return lfilter([1.0], [1.0, -e], drive)


def conv_backward(k, h, dt, tail):
    """Bounded solution s(t) = int_t^inf e^{-k (tau-t)} h(tau) dtau.

    Beyond the last node the integrand is frozen at ``tail``, which
    contributes tail/k there. One exact step:
        s_j = E s_{j+1} + i0 h_j + (i1/dt)(h_{j+1} - h_j),
        E = e^{-k dt}, i0 = (1-E)/k, i1 = (1-E)/k^2 - dt E / k.
    """
    h = np.asarray(h, dtype=float)
    e = np.exp(-k * dt)
    i0 = (1.0 - e) / k
    i1 = (1.0 - e) / k**2 - dt * e / k
    seg = i0 * h[:-1] + (i1 / dt) * (h[1:] - h[:-1])
    drive = np.empty_like(h)
    drive[0] = tail / k
    drive[1:] = seg[::-1]
    return lfilter([1.0], [1.0, -e], drive)[::-1]
