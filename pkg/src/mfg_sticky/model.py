"""Market primitives: scalar model constants, firm populations and
initial conditions shared by the limit solvers and the simulator.

All types are frozen dataclasses; they are immutable after construction
and safe to share across threads.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

# Tolerance for the unit-mean requirement on the limit gain distribution.
MEAN_GAIN_TOL = 1e-9


@dataclass(frozen=True)
class MarketParams:
    """Scalar constants of the sticky-price market.

    alpha : price adjustment speed (1/time, > 0)
    beta  : demand intercept (price units, > 0)
    mu    : output friction (1/time, > 0)
    sigma : diffusion coefficient (output units per sqrt(time), >= 0)
    rho   : discount rate (1/time, > 0)
    r     : adjustment-cost weight (> 0)
    c     : unit production cost (price units, 0 < c < beta)
    """

    alpha: float
    beta: float
    mu: float
    sigma: float
    rho: float
    r: float
    c: float


def validate_params(params: MarketParams) -> MarketParams:
    """Return ``params`` unchanged if admissible, else raise ParameterError.

    Idempotent: validating a validated object changes nothing.
    """
    checks = [
        (params.alpha > 0, "NONPOSITIVE_ADJUSTMENT_SPEED", "alpha must be > 0"),
        (params.beta > 0, "NONPOSITIVE_INTERCEPT", "beta must be > 0"),
        (params.mu > 0, "NONPOSITIVE_FRICTION", "mu must be > 0"),
        (params.sigma >= 0, "NEGATIVE_DIFFUSION", "sigma must be >= 0"),
        (params.rho > 0, "NONPOSITIVE_DISCOUNT", "rho must be > 0"),
        (params.r > 0, "NONPOSITIVE_WEIGHT", "r must be > 0"),
        (params.c > 0, "NONPOSITIVE_COST", "c must be > 0"),
    ]
    for ok, code, msg in checks:
        if not ok:
            raise ParameterError(code, msg)
    if not params.c < params.beta:
        raise ParameterError(
            "COST_EXCEEDS_INTERCEPT",
            f"require c < beta, got c={params.c}, beta={params.beta}",
        )
    return params


@dataclass(frozen=True)
class Population:
    """Firm gain coefficients and their limiting distribution.

    gains      : per-firm gain values b_i (each > 0)
    limit_dist : finite mixture ((theta_k, w_k), ...) representing the
                 weak limit of the empirical gain distribution
    theta_bound: compact support bound; every gain and atom must lie in
                 (0, theta_bound]
    """

    gains: tuple = ()
    limit_dist: tuple = ()
    theta_bound: float = field(default=0.0)

    def __post_init__(self):
        gains = tuple(float(b) for b in self.gains)
        dist = tuple((float(t), float(w)) for t, w in self.limit_dist)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "limit_dist", dist)
        bound = self.theta_bound
        if bound <= 0:
            bound = max([t for t, _ in dist] + list(gains), default=0.0)
            object.__setattr__(self, "theta_bound", float(bound))
        if not gains:
            raise ParameterError("EMPTY_POPULATION", "gains must be nonempty")
        if not dist:
            raise ParameterError("EMPTY_MIXTURE", "limit_dist must be nonempty")
        if any(b <= 0 for b in gains):
            raise ParameterError("NONPOSITIVE_GAIN", "every b_i must be > 0")
        if any(b > self.theta_bound + 1e-12 for b in gains):
            raise ParameterError(
                "GAIN_OUTSIDE_SUPPORT", "every b_i must be <= theta_bound"
            )
        w = np.array([w for _, w in dist])
        th = np.array([t for t, _ in dist])
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError("BAD_MIXTURE_WEIGHTS", "weights must be > 0, sum 1")
        if np.any(th <= 0):
            raise ParameterError("NONPOSITIVE_GAIN", "mixture atoms must be > 0")
        if abs(float(w @ th) - 1.0) > MEAN_GAIN_TOL:
            raise ParameterError(
                "MEAN_GAIN_NOT_ONE",
                f"limit distribution mean must equal 1, got {float(w @ th)}",
            )
        if float(w @ th**2) <= 0:
            raise ParameterError("ZERO_SECOND_MOMENT", "second moment must be > 0")

    @classmethod
    def uniform(cls, b, n_firms=1):
        """Point-mass population with every firm at gain ``b``.

        Note the unit-mean requirement forces b == 1 for a valid limit
        distribution; uniform solvers accept arbitrary b directly.
        """
        return cls(gains=(b,) * n_firms, limit_dist=((b, 1.0),))

    @classmethod
    def sampled(cls, mixture, n_firms, rng):
        """Draw ``n_firms`` gains i.i.d. from a finite mixture."""
        mixture = tuple((float(t), float(w)) for t, w in mixture)
        thetas = np.array([t for t, _ in mixture])
        weights = np.array([w for _, w in mixture])
        gains = rng.choice(thetas, size=n_firms, p=weights)
        return cls(gains=tuple(gains), limit_dist=mixture)

    def second_moment_limit(self):
        th = np.array([t for t, _ in self.limit_dist])
        w = np.array([w for _, w in self.limit_dist])
        return float(w @ th**2)

    def second_moment_empirical(self):
        g = np.asarray(self.gains)
        return float(np.mean(g**2))


def empirical_distribution(gains):
    """Finite mixture with a point mass at each distinct gain value,
    weighted by multiplicity / N."""
    if len(gains) == 0:
        raise ParameterError("EMPTY_POPULATION", "gains must be nonempty")
    values, counts = np.unique(np.asarray(gains, dtype=float), return_counts=True)
    n = len(gains)
    return tuple((float(v), float(k) / n) for v, k in zip(values, counts))


def epsilon_n(population: Population) -> float:
    """Second-moment gap between the empirical and limit gain distributions."""
    return abs(
        population.second_moment_empirical() - population.second_moment_limit()
    )


@dataclass(frozen=True)
class InitialConditions:
    """Deterministic initial price and the firm output-start distribution.

    q_i(0) is drawn Gaussian(q0_mean, q0_var) independently per firm;
    truncation at 0 only when ``truncate_initial_output`` is set.
    """

    p0: float
    q0_mean: float
    q0_var: float = 0.0
    truncate_initial_output: bool = False

    def __post_init__(self):
        if self.p0 <= 0:
            raise ParameterError("NONPOSITIVE_INITIAL_PRICE", "p0 must be > 0")
        if self.q0_mean <= 0:
            raise ParameterError("NONPOSITIVE_INITIAL_OUTPUT", "q0_mean must be > 0")
        if self.q0_var < 0:
            raise ParameterError("NEGATIVE_VARIANCE", "q0_var must be >= 0")
