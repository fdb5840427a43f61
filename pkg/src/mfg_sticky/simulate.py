"""Finite-N Monte Carlo engine.

Euler-Maruyama integration of the coupled price/output system under the
decentralized game or planner strategies, with discounted cost
estimation, mean-field error tracking, an empirical best-response
deviation-gap test and the passivity check.

Noise discipline: one Philox stream per (firm, replication), keyed as
(seed, replication << 32 | firm). Growing N therefore extends the firm
set without reshuffling existing firms' draws, which is what couples the
N-ladder scaling tests. The first draw of each stream is the firm's
initial-output normal; the rest are its Wiener increments.

Replications are processed in memory-bounded blocks, vectorized over
(replication, firm); aggregation is in replication order regardless of
thread scheduling, so results are bit-identical for a fixed config.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, RiccatiBlowupError, UnstableStepError
from .model import InitialConditions, MarketParams, Population
from .nash import NashLimit
from .social import SocialLimit

# Upper bound on floats held per noise block (~200 MB).
_BLOCK_BUDGET = 25_000_000
RICCATI_NORM_LIMIT = 1e12


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run settings; ``scheme`` is fixed to Euler-Maruyama."""

    n_firms: int
    dt: float
    horizon: float
    n_paths: int
    seed: int
    scheme: str = "euler-maruyama"
    threads: int = 1
    store_paths: bool = False

    def __post_init__(self):
        if self.n_firms < 1:
            raise ParameterError("BAD_N_FIRMS", "n_firms must be >= 1")
        if self.dt <= 0 or self.horizon <= 0 or self.n_paths < 1:
            raise ParameterError("BAD_SIM_CONFIG", "dt, horizon, n_paths must be > 0")
        if self.scheme != "euler-maruyama":
            raise ParameterError("BAD_SCHEME", "only euler-maruyama is supported")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))


@dataclass
class SimPaths:
    """Per-replication aggregate paths (kept only when store_paths is set)."""

    times: np.ndarray
    p: np.ndarray       # (n_paths, n_steps + 1)
    q_avg: np.ndarray   # (n_paths, n_steps + 1)
    v_avg: np.ndarray = None


@dataclass
class SimResult:
    times: np.ndarray
    price_path_mean: np.ndarray
    avg_output_path: np.ndarray
    per_firm_costs: np.ndarray
    cost_std_errors: np.ndarray
    social_cost: float
    mf_errors: dict
    tail_bound: float
    deviation_gap: float = None
    passivity_value: float = None
    paths: SimPaths = None
    diagnostics: dict = field(default_factory=dict)


def _check_step(params: MarketParams, dt: float):
    limit = 0.5 / max(params.alpha, params.mu)
    if dt > limit:
        raise UnstableStepError(
            f"dt={dt} exceeds the explicit-scheme guard {limit:.4g}",
            dt=dt,
            limit=limit,
        )


def firm_noise(seed: int, rep: int, firm: int, n_draws: int) -> np.ndarray:
    """The (firm, replication) stream: n_draws standard normals."""
    key = np.array([seed, (rep << 32) + firm], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(n_draws)


def _block_noise(seed, reps, n_firms, n_draws):
    out = np.empty((len(reps), n_firms, n_draws))
    for j, rep in enumerate(reps):
        for i in range(n_firms):
            out[j, i] = firm_noise(seed, rep, i, n_draws)
    return out


def _rep_blocks(config: SimConfig):
    n = config.n_steps
    per_rep = config.n_firms * (n + 1)
    block = max(1, min(config.n_paths, _BLOCK_BUDGET // per_rep))
    return [range(a, min(a + block, config.n_paths))
            for a in range(0, config.n_paths, block)]


def _gains_vector(population: Population, n_firms: int) -> np.ndarray:
    gains = np.asarray(population.gains, dtype=float)
    if gains.size == n_firms:
        return gains
    if gains.size == 1:
        return np.full(n_firms, gains[0])
    raise ParameterError(
        "POPULATION_SIZE_MISMATCH",
        f"population has {gains.size} gains but config.n_firms={n_firms}",
    )


def _interp_ref(limit_times, path, steady, t):
    return np.interp(t, limit_times, path, right=steady)


def estimate_costs(p_path, q_paths, u_paths, params: MarketParams, dt: float):
    """Discounted per-firm costs of one replication by left-endpoint
    quadrature: sum_k e^{-rho t_k} (-p q_i + c q_i + r u_i^2) dt.

    ``q_paths``/``u_paths`` have shape (n_firms, n_steps + 1); the final
    node is excluded (left endpoints only).
    """
    n = len(p_path) - 1
    disc = np.exp(-params.rho * dt * np.arange(n))
    p = np.asarray(p_path)[:n]
    q = np.asarray(q_paths)[..., :n]
    u = np.asarray(u_paths)[..., :n]
    stage = (params.c - p) * q + params.r * u**2
    return np.sum(stage * disc, axis=-1) * dt


def _simulate(params, gains, init, s_path, config, ref, track_v,
              control_offset=None):
    """Shared engine: ``s_path`` is the adjoint trajectory on the sim
    grid (first adjoint component in the planner case); firm controls
    are -(b_i/r) s(t) plus the optional per-firm offset."""
    _check_step(params, config.dt)
    n = config.n_steps
    dt = config.dt
    t = np.arange(n + 1) * dt
    alpha, beta, mu, sigma = params.alpha, params.beta, params.mu, params.sigma
    rho, r, c = params.rho, params.r, params.c
    u_base = np.outer(-gains / r, s_path)  # (n_firms, n+1)
    if control_offset is not None:
        u_base = u_base + control_offset
    disc = np.exp(-rho * t[:n])
    sqdt = np.sqrt(dt)

    def run_block(reps):
        noise = _block_noise(config.seed, reps, config.n_firms, n + 1)
        nb = len(reps)
        q = init.q0_mean + np.sqrt(init.q0_var) * noise[:, :, 0]
        if init.truncate_initial_output:
            q = np.maximum(q, 0.0)
        p = np.full(nb, float(init.p0))
        v = np.zeros(nb)
        acc = {
            "p_sum": np.zeros(n + 1),
            "q_sum": np.zeros(n + 1),
            "p_err": np.zeros(n + 1),
            "q_err": np.zeros(n + 1),
            "v_err": np.zeros(n + 1),
            "moment": np.zeros(n + 1),
            "J": np.zeros((nb, config.n_firms)),
            "p_paths": np.empty((nb, n + 1)) if config.store_paths else None,
            "q_paths": np.empty((nb, n + 1)) if config.store_paths else None,
            "v_paths": np.empty((nb, n + 1)) if config.store_paths and track_v else None,
        }
        for k in range(n + 1):
            q_avg = q.mean(axis=1)
            acc["p_sum"][k] = p.sum()
            acc["q_sum"][k] = q_avg.sum()
            acc["p_err"][k] = np.sum((p - ref["p"][k]) ** 2)
            acc["q_err"][k] = np.sum((q_avg - ref["q"][k]) ** 2)
            acc["moment"][k] = np.sum(p**2 + q_avg**2)
            if track_v:
                acc["v_err"][k] = np.sum((v - ref["v"][k]) ** 2)
            if config.store_paths:
                acc["p_paths"][:, k] = p
                acc["q_paths"][:, k] = q_avg
                if track_v:
                    acc["v_paths"][:, k] = v
            if k == n:
                break
            u_k = u_base[:, k]
            stage = (c - p[:, None]) * q + r * u_k[None, :] ** 2
            acc["J"] += disc[k] * stage * dt
            p = p + alpha * (beta - p - q_avg) * dt
            if track_v:
                v = v + alpha * (-q_avg - v) * dt
            q = q + (-mu * q + gains[None, :] * u_k[None, :]) * dt \
                + sigma * sqdt * noise[:, :, k + 1]
        return acc

    blocks = _rep_blocks(config)
    if config.threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(run_block, blocks))
    else:
        results = [run_block(b) for b in blocks]

    reps = config.n_paths
    p_mean = sum(a["p_sum"] for a in results) / reps
    q_mean = sum(a["q_sum"] for a in results) / reps
    j = np.concatenate([a["J"] for a in results], axis=0)
    per_firm = j.mean(axis=0)
    se = j.std(axis=0, ddof=1) / np.sqrt(reps) if reps > 1 else np.zeros_like(per_firm)
    mf = {
        "price": float(np.max(sum(a["p_err"] for a in results)) / reps),
        "output": float(np.max(sum(a["q_err"] for a in results)) / reps),
        "moment_sup": float(np.max(sum(a["moment"] for a in results)) / reps),
    }
    if track_v:
        mf["correction"] = float(np.max(sum(a["v_err"] for a in results)) / reps)

    # crude tail mass dropped by truncating the discounted integral
    stage_inf = abs((c - ref["p"][-1]) * ref["q"][-1]
                    + r * (np.mean(gains) * s_path[-1] / r) ** 2)
    tail = np.exp(-rho * config.horizon) * max(stage_inf, 1.0) / rho

    paths = None
    if config.store_paths:
        paths = SimPaths(
            times=t,
            p=np.concatenate([a["p_paths"] for a in results], axis=0),
            q_avg=np.concatenate([a["q_paths"] for a in results], axis=0),
            v_avg=(np.concatenate([a["v_paths"] for a in results], axis=0)
                   if track_v else None),
        )
    return SimResult(
        times=t,
        price_path_mean=p_mean,
        avg_output_path=q_mean,
        per_firm_costs=per_firm,
        cost_std_errors=se,
        social_cost=float(per_firm.mean()),
        mf_errors=mf,
        tail_bound=float(tail),
        paths=paths,
    )


def simulate_nash(params: MarketParams, population: Population,
                  init: InitialConditions, limit: NashLimit,
                  config: SimConfig) -> SimResult:
    """Finite-N run under the game strategies u_i = -(b_i/r) s(t)."""
    t = np.arange(config.n_steps + 1) * config.dt
    gains = _gains_vector(population, config.n_firms)
    ref = {
        "p": _interp_ref(limit.times, limit.p, limit.z[0], t),
        "q": _interp_ref(limit.times, limit.q, limit.z[1], t),
    }
    s_path = limit.s_of_t(t)
    return _simulate(params, gains, init, s_path, config, ref, track_v=False)


def simulate_social(params: MarketParams, population: Population,
                    init: InitialConditions, limit: SocialLimit,
                    config: SimConfig, control_offset=None) -> SimResult:
    """Finite-N run under the planner strategies u_i = -(b_i/r) s1(t),
    with the per-firm output-correction ODE integrated alongside."""
    t = np.arange(config.n_steps + 1) * config.dt
    gains = _gains_vector(population, config.n_firms)
    ref = {
        "p": _interp_ref(limit.times, limit.p, limit.z[0], t),
        "q": _interp_ref(limit.times, limit.q, limit.z[3], t),
        "v": _interp_ref(limit.times, limit.v, limit.z[4], t),
    }
    s_path = limit.s1_of_t(t)
    return _simulate(params, gains, init, s_path, config, ref, track_v=True,
                     control_offset=control_offset)


def _best_response_gains(params: MarketParams, b_dev: float, q_bar, n_firms,
                         config: SimConfig):
    """Backward time-discretized Riccati recursion for the deviating
    firm's LQ tracking problem on state (price, own output).

    The rest of the population is frozen at the limit strategy, entering
    through the deterministic mean-output path and a 1/N self-influence
    term in the price dynamics. The discount is folded into the stage
    weights; terminal value is 0 at the truncation horizon.
    """
    n = config.n_steps
    dt = config.dt
    alpha, mu, rho, r, c = (params.alpha, params.mu, params.rho,
                            params.r, params.c)
    a_mat = np.array([[1 - alpha * dt, -alpha * dt / n_firms],
                      [0.0, 1 - mu * dt]])
    b_vec = np.array([0.0, b_dev * dt])
    q_w = np.array([[0.0, -0.5], [-0.5, 0.0]])
    l_w = np.array([0.0, c / 2.0])
    p_mat = np.zeros((2, 2))
    h = np.zeros(2)
    k_gain = np.zeros((n, 2))
    k_aff = np.zeros(n)
    share = (n_firms - 1) / n_firms
    for k in range(n - 1, -1, -1):
        g = np.exp(-rho * k * dt)
        c_k = np.array([alpha * dt * (params.beta - share * q_bar[k]), 0.0])
        s = g * dt * r + b_vec @ p_mat @ b_vec
        kk = (b_vec @ p_mat @ a_mat) / s
        k0 = b_vec @ (p_mat @ c_k + h) / s
        p_new = g * dt * q_w + a_mat.T @ p_mat @ a_mat - np.outer(kk, kk) * s
        h = g * dt * l_w + a_mat.T @ (p_mat @ c_k + h) - kk * s * k0
        p_mat = 0.5 * (p_new + p_new.T)
        if not np.all(np.isfinite(p_mat)) or np.abs(p_mat).max() > RICCATI_NORM_LIMIT:
            raise RiccatiBlowupError(
                "backward Riccati recursion diverged", step=k
            )
        k_gain[k] = kk
        k_aff[k] = k0
    return k_gain, k_aff


@dataclass
class GapEstimate:
    epsilon: float
    mean_gap: float
    std_error: float
    j_nominal: float
    j_deviated: float


def deviation_gap(params: MarketParams, population: Population,
                  init: InitialConditions, limit: NashLimit,
                  config: SimConfig, deviating_firm: int = 0) -> GapEstimate:
    """Empirical unilateral-improvement gap for one firm.

    Runs matched-noise nominal and best-response simulations and
    estimates epsilon = max(0, E J(nominal) - E J(best response));
    common random numbers make the O(1/sqrt(N)) decay visible at modest
    replication counts.
    """
    _check_step(params, config.dt)
    n = config.n_steps
    dt = config.dt
    t = np.arange(n + 1) * dt
    gains = _gains_vector(population, config.n_firms)
    i0 = deviating_firm
    alpha, beta, mu, sigma = params.alpha, params.beta, params.mu, params.sigma
    rho, r, c = params.rho, params.r, params.c

    q_bar = _interp_ref(limit.times, limit.q, limit.z[1], t)
    s_path = limit.s_of_t(t)
    u_hat = np.outer(-gains / r, s_path)
    k_gain, k_aff = _best_response_gains(params, gains[i0], q_bar,
                                         config.n_firms, config)
    disc = np.exp(-rho * t[:n])
    sqdt = np.sqrt(dt)

    def run_block(reps):
        noise = _block_noise(config.seed, reps, config.n_firms, n + 1)
        nb = len(reps)
        q0 = init.q0_mean + np.sqrt(init.q0_var) * noise[:, :, 0]
        if init.truncate_initial_output:
            q0 = np.maximum(q0, 0.0)
        j_nom = np.zeros(nb)
        j_dev = np.zeros(nb)
        for mode in ("nominal", "deviated"):
            p = np.full(nb, float(init.p0))
            q = q0.copy()
            j_acc = np.zeros(nb)
            for k in range(n):
                if mode == "nominal":
                    u0 = np.full(nb, u_hat[i0, k])
                else:
                    u0 = -(k_gain[k, 0] * p + k_gain[k, 1] * q[:, i0]) - k_aff[k]
                j_acc += disc[k] * ((c - p) * q[:, i0] + r * u0**2) * dt
                q_avg = q.mean(axis=1)
                u_k = np.tile(u_hat[:, k], (nb, 1))
                u_k[:, i0] = u0
                p = p + alpha * (beta - p - q_avg) * dt
                q = q + (-mu * q + gains[None, :] * u_k) * dt \
                    + sigma * sqdt * noise[:, :, k + 1]
            if mode == "nominal":
                j_nom = j_acc
            else:
                j_dev = j_acc
        return j_nom, j_dev

    blocks = _rep_blocks(config)
    parts = [run_block(b) for b in blocks]
    j_nom = np.concatenate([a for a, _ in parts])
    j_dev = np.concatenate([b for _, b in parts])
    diffs = j_nom - j_dev
    mean_gap = float(diffs.mean())
    se = float(diffs.std(ddof=1) / np.sqrt(len(diffs))) if len(diffs) > 1 else 0.0
    return GapEstimate(
        epsilon=max(0.0, mean_gap),
        mean_gap=mean_gap,
        std_error=se,
        j_nominal=float(j_nom.mean()),
        j_deviated=float(j_dev.mean()),
    )


@dataclass
class PassivityResult:
    value: float
    std_error: float
    identity_max_err: float


def passivity_check(paths_nominal: SimPaths, paths_deviated: SimPaths,
                    params: MarketParams) -> PassivityResult:
    """Discounted passivity integral E int e^{-rho t} (-p~) q~^(N) dt for
    matched-seed planner runs, where p~ and q~^(N) are the price and
    average-output deviations; also checks the v~^(N) = p~ identity."""
    t = paths_nominal.times
    dt = float(t[1] - t[0])
    p_t = paths_deviated.p - paths_nominal.p
    q_t = paths_deviated.q_avg - paths_nominal.q_avg
    disc = np.exp(-params.rho * t)
    per_rep = np.sum(disc * (-p_t) * q_t, axis=1) * dt
    value = float(per_rep.mean())
    se = (float(per_rep.std(ddof=1) / np.sqrt(len(per_rep)))
          if len(per_rep) > 1 else 0.0)
    ident = np.inf
    if paths_nominal.v_avg is not None and paths_deviated.v_avg is not None:
        v_t = paths_deviated.v_avg - paths_nominal.v_avg
        ident = float(np.max(np.abs(v_t - p_t)))
    return PassivityResult(value=value, std_error=se, identity_max_err=ident)


def run_passivity_trial(params: MarketParams, population: Population,
                        init: InitialConditions, limit: SocialLimit,
                        config: SimConfig, deviation,
                        deviating_firm=0) -> PassivityResult:
    """One matched-seed deviation trial.

    ``deviation`` is either a scalar shift applied to every firm's
    control (deviating_firm=None) or an array / scalar added to one
    firm's control over time.
    """
    config = SimConfig(
        n_firms=config.n_firms, dt=config.dt, horizon=config.horizon,
        n_paths=config.n_paths, seed=config.seed, scheme=config.scheme,
        threads=config.threads, store_paths=True,
    )
    n = config.n_steps
    offset = np.zeros((config.n_firms, n + 1))
    if deviating_firm is None:
        offset += deviation
    else:
        offset[deviating_firm] = deviation
    nominal = simulate_social(params, population, init, limit, config)
    deviated = simulate_social(params, population, init, limit, config,
                               control_offset=offset)
    return passivity_check(nominal.paths, deviated.paths, params)
