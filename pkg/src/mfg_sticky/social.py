"""Cooperative (planner) limit system.

Solves the social-optimum consistency system in the 5-vector ordering
(price, first adjoint, second adjoint, average output, output
correction), spectrally for uniform gains and by Picard iteration for
heterogeneous populations, and evaluates the closed-form asymptotic
social cost.
"""

from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .errors import NoConvergenceError
from .expsum import ExpSum
from .grids import TimeGrid, conv_backward, conv_forward
from .model import InitialConditions, MarketParams, Population, validate_params
from .nash import riccati_root

V_BAR_RESIDUAL_TOL = 1e-6


def build_matrix_social(params: MarketParams, b2: float):
    """5x5 system matrix and affine drive; ordering (p, s1, s2, y1, y2)."""
    a, mu, rho, r = params.alpha, params.mu, params.rho, params.r
    m = np.array(
        [
            [-a, 0.0, 0.0, -a, 0.0],
            [0.5, rho + mu, a, 0.0, 0.0],
            [0.0, 0.0, rho + a, 0.5, 0.0],
            [0.0, -b2 / r, 0.0, -mu, 0.0],
            [0.0, 0.0, 0.0, -a, -a],
        ]
    )
    drive = np.array([a * params.beta, -params.c / 2.0, 0.0, 0.0, 0.0])
    return m, drive


def steady_state_social(params: MarketParams, b2: float):
    m, drive = build_matrix_social(params, b2)
    return np.linalg.solve(m, -drive)


@dataclass
class SocialLimit:
    """Solved planner limit. ``s1``/``s2`` are the adjoint components,
    ``q`` the average output and ``v`` the discounted output correction;
    ``y_atoms[k]`` holds the per-atom (output, correction) pair for
    heterogeneous populations."""

    z: np.ndarray
    times: np.ndarray
    p: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    q: np.ndarray
    v: np.ndarray
    params: MarketParams
    spectral: "spectral.SpectralData" = None
    a_coeffs: np.ndarray = None
    exp: ExpSum = None
    y_atoms: np.ndarray = None
    j_soc_inf: float = None
    diagnostics: dict = field(default_factory=dict)

    def s1_of_t(self, t):
        if self.exp is not None:
            return self.exp.component(1)(t)
        return np.interp(t, self.times, self.s1, right=self.z[1])


def _check_v_identity(limit, dt):
    """The output correction must equal its defining convolution of the
    average output (zero start, kernel rate alpha).

    With the exponential-sum solution the convolution integrates in
    closed form, mode by mode; otherwise fall back to the discrete
    exponential-kernel convolution on the grid.
    """
    alpha = limit.params.alpha
    t = limit.times
    if limit.exp is not None:
        cq_all = limit.exp.coeffs[:, 3]
        keep = np.abs(cq_all) > 1e-8 * max(1.0, float(np.max(np.abs(cq_all))))
        rates = limit.exp.rates[keep]
        cq = cq_all[keep]
        if rates.size and np.min(np.abs(rates + alpha)) < 1e-8:
            raise ValueError("convolution mode resonates with the kernel rate")
        terms = -alpha * cq / (rates + alpha)
        v_conv = np.real(
            np.exp(np.multiply.outer(t, rates)) @ terms
            - np.exp(-alpha * t) * terms.sum()
        )
    else:
        v_conv = conv_forward(alpha, -alpha * limit.q, dt, y0=0.0)
    resid = float(np.max(np.abs(v_conv - limit.v)))
    limit.diagnostics["v_convolution_residual"] = resid
    assert resid <= V_BAR_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(limit.v))))


def solve_social_uniform(params: MarketParams, b: float, init: InitialConditions,
                         grid: TimeGrid = None) -> SocialLimit:
    """Spectral solution for a uniform population with gain ``b``.

    Asserts the structural eigenpair (-alpha, e5), checks the Routh
    verdict on the deflated quartic (2 stable + the -alpha factor = 3),
    and selects the bounded trajectory through the boundary solve on the
    (price, output, correction) coordinates.
    """
    validate_params(params)
    assert riccati_root(params, b) == 0.0
    grid = grid or TimeGrid.default_for(params)

    m, drive = build_matrix_social(params, b**2)
    z = np.linalg.solve(m, -drive)
    assert np.linalg.norm(m @ z + drive) <= 1e-9 * max(1.0, np.linalg.norm(drive))

    poly = spectral.char_poly(m)
    quartic, rem = np.polydiv(poly, [1.0, params.alpha])
    assert np.max(np.abs(rem)) <= 1e-8 * np.max(np.abs(poly))
    verdict = spectral.routh_count(quartic)
    assert verdict.stable_count == 2

    spec = spectral.eigendecompose(m)
    assert spec.stable_count == 3
    i_alpha = int(np.argmin(np.abs(spec.eigenvalues + params.alpha)))
    assert abs(spec.eigenvalues[i_alpha] + params.alpha) <= 1e-8
    e5 = np.zeros(5)
    e5[4] = 1.0
    assert np.linalg.norm(np.abs(spec.eigenvectors[:, i_alpha]) - e5) <= 1e-8

    sel = [0, 3, 4]
    target = np.array([init.p0, init.q0_mean, 0.0]) - z[sel]
    a = spectral.boundary_solve(spec.stable_vectors, sel, target)

    rates = np.concatenate(([0.0 + 0.0j], spec.stable_eigenvalues))
    coeffs = np.vstack([z.astype(complex), a[:, None] * spec.stable_vectors.T])
    exp = ExpSum(rates=rates, coeffs=coeffs)

    t = grid.times
    paths = exp(t)
    limit = SocialLimit(
        z=z,
        times=t,
        p=paths[:, 0],
        s1=paths[:, 1],
        s2=paths[:, 2],
        q=paths[:, 3],
        v=paths[:, 4],
        params=params,
        spectral=spec,
        a_coeffs=a,
        exp=exp,
        diagnostics={"routh_first_column_quartic": verdict.first_column},
    )
    _check_v_identity(limit, grid.dt)
    limit.j_soc_inf = social_cost_closed_form(limit, params, b, init.q0_mean)
    return limit


def _second_moment(population) -> float:
    """Accept a Population or a bare uniform gain."""
    if isinstance(population, Population):
        return population.second_moment_limit()
    return float(population) ** 2


def social_cost_closed_form(limit: SocialLimit, params: MarketParams,
                            population, q0_mean: float) -> float:
    """Asymptotic per-firm social cost from the exponential-sum solution.

    Three terms: the endowment term q0 * s1(0), the discounted adjoint
    square with gain weight -b2/r, and the discounted output-correction
    product. As in the game cost, the reported value uses the
    q0 * s1(0) normalization of the reference cost table; the
    dynamic-programming value 2 s1(0) q0 + (rest) is in
    diagnostics["expected_cost"].
    """
    if limit.exp is None:
        raise ValueError("closed-form cost needs the exponential-sum solution")
    rho, r = params.rho, params.r
    b2 = _second_moment(population)
    s1 = limit.exp.component(1)
    q = limit.exp.component(3)
    v = limit.exp.component(4)
    s10 = s1.value0()
    term_s = -(b2 / r) * s1.discounted_product(s1, rho)
    term_qv = q.discounted_product(v, rho)
    assert max(abs(s10.imag), abs(term_s.imag), abs(term_qv.imag)) <= 1e-9
    j = q0_mean * s10.real + term_s.real + term_qv.real
    limit.diagnostics.update(
        {
            "s1_0": s10.real,
            "g0": term_s.real,
            "qv_integral": term_qv.real,
            "expected_cost": 2 * q0_mean * s10.real + term_s.real + term_qv.real,
        }
    )
    quad = social_cost_quadrature(limit, params, population, q0_mean)
    assert abs(j - quad) <= 1e-5 * max(1.0, abs(j))
    return j


def social_cost_quadrature(limit: SocialLimit, params: MarketParams,
                           population, q0_mean: float, dt: float = 1e-3) -> float:
    """Independent route: trapezoid quadrature of the discounted
    integrand on a fine grid (same normalization as the closed form)."""
    rho, r = params.rho, params.r
    b2 = _second_moment(population)
    t_max = max(limit.times[-1], 20.0 / rho)
    t = np.arange(int(t_max / dt) + 1) * dt
    if limit.exp is not None:
        s1 = limit.exp.component(1)(t)
        q = limit.exp.component(3)(t)
        v = limit.exp.component(4)(t)
    else:
        s1 = np.interp(t, limit.times, limit.s1, right=limit.z[1])
        q = np.interp(t, limit.times, limit.q, right=limit.z[3])
        v = np.interp(t, limit.times, limit.v, right=limit.z[4])
    integrand = np.exp(-rho * t) * (-(b2 / r) * s1**2 + q * v)
    return q0_mean * float(s1[0]) + np.trapezoid(integrand, t)


def solve_social_fixedpoint(params: MarketParams, population: Population,
                            init: InitialConditions, grid: TimeGrid = None,
                            tol_fp: float = 1e-8, max_iters: int = 500,
                            damping: float = 1.0) -> SocialLimit:
    """Picard iteration on the average output for a heterogeneous
    population.

    Each sweep: price forward from the demand ODE, the two adjoint
    components backward as bounded solutions (the second depends only on
    the average output, the first on price and the second), each atom's
    output forward, then recombine the average. The correction is the
    defining convolution of the average output.
    """
    validate_params(params)
    grid = grid or TimeGrid.default_for(params)
    t = grid.times
    dt = grid.dt
    decay = np.exp(-min(params.alpha, params.mu) * grid.t_max)
    if decay > 1e-8:
        raise ValueError(
            f"horizon too short: slowest-mode decay {decay:.2e} exceeds 1e-8"
        )

    alpha, mu, rho, r = params.alpha, params.mu, params.rho, params.r
    beta, c = params.beta, params.c
    thetas = np.array([th for th, _ in population.limit_dist])
    weights = np.array([w for _, w in population.limit_dist])
    b2m = population.second_moment_limit()
    z = steady_state_social(params, b2m)

    def iterate(q_bar):
        p_bar = conv_forward(alpha, alpha * (beta - q_bar), dt, y0=init.p0)
        s2 = conv_backward(rho + alpha, -q_bar / 2.0, dt, tail=-z[3] / 2.0)
        s1 = conv_backward(
            rho + mu,
            (c - p_bar) / 2.0 - alpha * s2,
            dt,
            tail=(c - z[0]) / 2.0 - alpha * z[2],
        )
        y1 = np.array(
            [conv_forward(mu, -(th**2 / r) * s1, dt, y0=init.q0_mean) for th in thetas]
        )
        return p_bar, s1, s2, y1, weights @ y1

    def run(damp):
        q_bar = z[3] + (init.q0_mean - z[3]) * np.exp(-mu * t)
        history = []
        for it in range(max_iters):
            p_bar, s1, s2, y1, q_new = iterate(q_bar)
            delta = float(np.max(np.abs(q_new - q_bar)))
            history.append(delta)
            q_bar = (1.0 - damp) * q_bar + damp * q_new
            if delta <= tol_fp:
                return p_bar, s1, s2, y1, q_bar, it + 1, history
        return (None,) * 5 + (max_iters, history)

    p_bar, s1, s2, y1, q_bar, iters, history = run(damping)
    if p_bar is None and damping == 1.0:
        p_bar, s1, s2, y1, q_bar, iters, history = run(0.5)
    if p_bar is None:
        raise NoConvergenceError(
            "fixed-point iteration did not converge",
            last_deltas=history[-5:],
            iterations=iters,
        )
    y2 = np.array([conv_forward(alpha, -alpha * y, dt, y0=0.0) for y in y1])
    v_bar = weights @ y2
    limit = SocialLimit(
        z=z,
        times=t,
        p=p_bar,
        s1=s1,
        s2=s2,
        q=q_bar,
        v=v_bar,
        params=params,
        y_atoms=np.stack([y1, y2], axis=1),
        diagnostics={"iterations": iters, "sup_changes": history},
    )
    _check_v_identity(limit, dt)
    return limit


def strategy_social(limit: SocialLimit, b_i: float):
    """Planner-assigned open-loop control; only the first adjoint
    component enters because the control channel is (b_i, 0)."""
    scale = -b_i / limit.params.r

    def control(t):
        return scale * limit.s1_of_t(t)

    return control
