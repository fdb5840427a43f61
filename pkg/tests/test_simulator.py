import numpy as np
import pytest

from mfg_sticky.errors import UnstableStepError
from mfg_sticky.model import InitialConditions, MarketParams, Population
from mfg_sticky.nash import solve_uniform
from mfg_sticky.simulate import (
    SimConfig,
    deviation_gap,
    estimate_costs,
    firm_noise,
    run_passivity_trial,
    simulate_nash,
    simulate_social,
)
from mfg_sticky.social import solve_social_uniform

PARAMS = MarketParams(alpha=1.0, beta=10.0, mu=0.15, sigma=0.2, rho=0.6, r=1.0, c=2.0)
PARAMS_DET = MarketParams(alpha=1.0, beta=10.0, mu=0.15, sigma=0.0, rho=0.6,
                          r=1.0, c=2.0)
INIT = InitialConditions(p0=1.0, q0_mean=2.0, q0_var=0.2)
INIT_DET = InitialConditions(p0=1.0, q0_mean=2.0, q0_var=0.0)


def _cfg(**kw):
    base = dict(n_firms=20, dt=0.01, horizon=10.0, n_paths=10, seed=99)
    base.update(kw)
    return SimConfig(**base)


def test_config_validation():
    with pytest.raises(Exception):
        SimConfig(n_firms=0, dt=0.01, horizon=10.0, n_paths=1, seed=1)
    with pytest.raises(Exception):
        SimConfig(n_firms=1, dt=-0.01, horizon=10.0, n_paths=1, seed=1)
    with pytest.raises(Exception):
        SimConfig(n_firms=1, dt=0.01, horizon=10.0, n_paths=1, seed=1,
                  scheme="milstein")


def test_unstable_step_guard():
    lim = solve_uniform(PARAMS, 1.0, INIT)
    cfg = _cfg(dt=0.6)
    with pytest.raises(UnstableStepError) as exc:
        simulate_nash(PARAMS, Population.uniform(1.0, 20), INIT, lim, cfg)
    assert exc.value.code == "UNSTABLE_STEP"


def test_firm_noise_streams_are_stable_in_n():
    """Firm i's draws do not depend on how many other firms exist."""
    a = firm_noise(7, rep=3, firm=5, n_draws=100)
    b = firm_noise(7, rep=3, firm=5, n_draws=100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, firm_noise(7, rep=3, firm=6, n_draws=100))
    assert not np.array_equal(a, firm_noise(7, rep=4, firm=5, n_draws=100))


def test_reproducible_and_deterministic():
    lim = solve_uniform(PARAMS, 1.0, INIT)
    pop = Population.uniform(1.0, 20)
    r1 = simulate_nash(PARAMS, pop, INIT, lim, _cfg())
    r2 = simulate_nash(PARAMS, pop, INIT, lim, _cfg())
    assert np.array_equal(r1.price_path_mean, r2.price_path_mean)
    assert np.array_equal(r1.per_firm_costs, r2.per_firm_costs)


def test_threaded_aggregation_matches_serial():
    lim = solve_uniform(PARAMS, 1.0, INIT)
    pop = Population.uniform(1.0, 20)
    # many small blocks so the thread pool actually splits the work
    r1 = simulate_nash(PARAMS, pop, INIT, lim, _cfg(n_paths=40))
    r2 = simulate_nash(PARAMS, pop, INIT, lim, _cfg(n_paths=40, threads=4))
    assert np.array_equal(r1.price_path_mean, r2.price_path_mean)
    assert np.array_equal(r1.per_firm_costs, r2.per_firm_costs)


def test_deterministic_single_firm_tracks_limit():
    """With sigma=0, one firm and matched initials, the finite system IS
    the mean-field system up to Euler discretization error."""
    lim = solve_uniform(PARAMS_DET, 1.0, INIT_DET)
    cfg = SimConfig(n_firms=1, dt=0.005, horizon=30.0, n_paths=1, seed=1)
    res = simulate_nash(PARAMS_DET, Population.uniform(1.0, 1), INIT_DET, lim, cfg)
    t = res.times
    assert np.max(np.abs(res.price_path_mean - lim.exp.component(0)(t))) < 3 * cfg.dt
    assert np.max(np.abs(res.avg_output_path - lim.exp.component(1)(t))) < 3 * cfg.dt


def test_halving_dt_halves_deterministic_error():
    lim = solve_uniform(PARAMS_DET, 1.0, INIT_DET)
    errs = []
    for dt in (0.02, 0.01):
        cfg = SimConfig(n_firms=1, dt=dt, horizon=20.0, n_paths=1, seed=1)
        res = simulate_nash(PARAMS_DET, Population.uniform(1.0, 1), INIT_DET,
                            lim, cfg)
        errs.append(np.max(np.abs(res.price_path_mean
                                  - lim.exp.component(0)(res.times))))
    assert errs[1] < 0.75 * errs[0]


def test_social_cost_is_mean_of_per_firm_costs():
    lim = solve_social_uniform(PARAMS, 1.0, INIT)
    res = simulate_social(PARAMS, Population.uniform(1.0, 20), INIT, lim, _cfg())
    assert res.social_cost == pytest.approx(res.per_firm_costs.mean(), rel=1e-14)
    assert "correction" in res.mf_errors


def test_estimate_costs_zero_paths():
    n = 100
    p = np.full(n + 1, 3.0)
    q = np.zeros((2, n + 1))
    u = np.zeros((2, n + 1))
    out = estimate_costs(p, q, u, PARAMS, dt=0.01)
    assert np.allclose(out, 0.0)


def test_estimate_costs_frozen_paths_geometric():
    """Constant (p, q, u) gives J = (-pq + cq + ru^2)/rho up to
    truncation and left-endpoint discretization."""
    dt, horizon = 0.001, 60.0
    n = int(horizon / dt)
    p_star, q_star, u_star = 4.0, 1.5, -0.3
    p = np.full(n + 1, p_star)
    q = np.full((1, n + 1), q_star)
    u = np.full((1, n + 1), u_star)
    out = estimate_costs(p, q, u, PARAMS, dt=dt)
    expect = (-p_star * q_star + PARAMS.c * q_star + PARAMS.r * u_star**2) / PARAMS.rho
    assert out[0] == pytest.approx(expect, rel=1e-3)


def test_mc_cost_matches_limit_value():
    lim = solve_uniform(PARAMS, 1.0, INIT)
    cfg = SimConfig(n_firms=50, dt=0.01, horizon=50.0, n_paths=200, seed=42)
    res = simulate_nash(PARAMS, Population.uniform(1.0, 50), INIT, lim, cfg)
    se = float(res.cost_std_errors.mean())
    assert abs(res.social_cost - lim.diagnostics["expected_cost"]) < 3 * se
    assert res.tail_bound < 0.01 * abs(res.social_cost)


def test_mean_price_tracks_limit():
    lim = solve_uniform(PARAMS, 1.0, INIT)
    cfg = SimConfig(n_firms=50, dt=0.01, horizon=20.0, n_paths=200, seed=5)
    res = simulate_nash(PARAMS, Population.uniform(1.0, 50), INIT, lim, cfg)
    p_bar = lim.exp.component(0)(res.times)
    assert np.max(np.abs(res.price_path_mean - p_bar)) < 0.1


def test_social_price_above_nash_price_late():
    lim_n = solve_uniform(PARAMS, 1.0, INIT)
    lim_s = solve_social_uniform(PARAMS, 1.0, INIT)
    pop = Population.uniform(1.0, 50)
    cfg = SimConfig(n_firms=50, dt=0.01, horizon=20.0, n_paths=100, seed=12)
    res_n = simulate_nash(PARAMS, pop, INIT, lim_n, cfg)
    res_s = simulate_social(PARAMS, pop, INIT, lim_s, cfg)
    late = res_n.times > 10.0
    assert np.all(res_s.price_path_mean[late] > res_n.price_path_mean[late])
    # Planner output is lower on time average
    assert res_s.avg_output_path.mean() < res_n.avg_output_path.mean()


def test_deviation_gap_monopolist_positive():
    """For N=1 the mean-field strategy ignores the firm's own price
    impact entirely, so a best response strictly improves."""
    lim = solve_uniform(PARAMS, 1.0, INIT)
    cfg = SimConfig(n_firms=1, dt=0.02, horizon=30.0, n_paths=40, seed=3)
    gap = deviation_gap(PARAMS, Population.uniform(1.0, 1), INIT, lim, cfg)
    assert gap.epsilon > 10 * gap.std_error
    assert gap.j_deviated < gap.j_nominal


def test_deviation_gap_reproducible():
    lim = solve_uniform(PARAMS, 1.0, INIT)
    cfg = SimConfig(n_firms=10, dt=0.02, horizon=20.0, n_paths=20, seed=8)
    pop = Population.uniform(1.0, 10)
    g1 = deviation_gap(PARAMS, pop, INIT, lim, cfg)
    g2 = deviation_gap(PARAMS, pop, INIT, lim, cfg)
    assert g1.mean_gap == g2.mean_gap


def test_passivity_zero_deviation():
    lim = solve_social_uniform(PARAMS, 1.0, INIT)
    cfg = SimConfig(n_firms=10, dt=0.01, horizon=10.0, n_paths=4, seed=17)
    out = run_passivity_trial(PARAMS, Population.uniform(1.0, 10), INIT, lim,
                              cfg, deviation=0.0)
    assert out.value == pytest.approx(0.0, abs=1e-14)
    assert out.identity_max_err <= 5 * cfg.dt


def test_passivity_single_firm_deviation_nonnegative():
    lim = solve_social_uniform(PARAMS, 1.0, INIT)
    cfg = SimConfig(n_firms=20, dt=0.01, horizon=20.0, n_paths=4, seed=21)
    rng = np.random.default_rng(0)
    dev = rng.uniform(-0.5, 0.5, cfg.n_steps + 1)
    out = run_passivity_trial(PARAMS, Population.uniform(1.0, 20), INIT, lim,
                              cfg, deviation=dev, deviating_firm=3)
    assert out.value >= -3 * out.std_error - 1e-12
    assert out.identity_max_err <= 5 * cfg.dt
