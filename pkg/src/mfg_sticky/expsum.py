"""Exponential-sum trajectories x(t) = sum_j c_j * exp(rate_j * t).

The spectral limit solutions live in this form, which makes discounted
quadratic integrals exact: for scalar sums u, v and discount rho,

    int_0^inf e^{-rho t} u(t) v(t) dt
        = sum_{ij} u_i v_j / (rho - rate_i - rate_j),

valid whenever every rate has real part < rho/2 (steady-state terms use
rate 0).
"""

from dataclasses import dataclass

import numpy as np

IMAG_RESIDUE_TOL = 1e-9


@dataclass(frozen=True)
class ExpSum:
    """coeffs[j] may be scalars or vectors; rates[j] are complex scalars."""

    rates: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rates", np.asarray(self.rates, dtype=complex))
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex))

    def __call__(self, t, check_imag=True):
        t = np.asarray(t, dtype=float)
        phases = np.exp(np.multiply.outer(t, self.rates))
        vals = phases @ self.coeffs
        if check_imag and np.max(np.abs(vals.imag), initial=0.0) > IMAG_RESIDUE_TOL * (
            1.0 + np.max(np.abs(vals.real), initial=0.0)
        ):
            raise ValueError("trajectory has a nonnegligible imaginary part")
        return vals.real

    def component(self, i):
        """Scalar ExpSum for one coordinate of a vector-valued sum."""
        return ExpSum(rates=self.rates, coeffs=self.coeffs[:, i])

    def value0(self):
        return complex(self.coeffs.sum())

    def derivative(self):
        return ExpSum(rates=self.rates, coeffs=self.coeffs * self.rates[:, None]
                      if self.coeffs.ndim == 2 else self.coeffs * self.rates)

    def discounted_product(self, other, rho):
        """Exact int_0^inf e^{-rho t} self(t) other(t) dt for scalar sums."""
        if self.coeffs.ndim != 1 or other.coeffs.ndim != 1:
            raise ValueError("discounted_product needs scalar exponential sums")
        denom = rho - np.add.outer(self.rates, other.rates)
        if np.any(denom.real <= 0):
            raise ValueError("integral diverges: rate pair exceeds the discount")
        total = np.sum(np.outer(self.coeffs, other.coeffs) / denom)
        return complex(total)
