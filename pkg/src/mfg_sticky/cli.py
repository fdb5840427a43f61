"""Experiment runner.

JSON config in (versioned schema, unknown keys rejected), CSV/JSON
artifacts out: limit trajectories, spectral data, simulated paths and a
summary with provenance-tagged numbers. Exit codes: 0 ok, 2 config
error, 3 solver error, 4 simulation error.
"""

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import nash, simulate, social
from .errors import (
    ConfigError,
    MfgError,
    ParameterError,
    ParamsMismatchError,
    RiccatiBlowupError,
    UnstableStepError,
)
from .grids import TimeGrid
from .model import (
    InitialConditions,
    MarketParams,
    Population,
    empirical_distribution,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_SIM = 4

TABLE1_ALPHAS = (0.1, 0.2, 0.5, 1.0, 5.0)
_PARAM_FIELDS = ("alpha", "beta", "mu", "sigma", "rho", "r", "c")

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "mode", "params", "init"],
    "properties": {
        "schema": {"const": 1},
        "mode": {"enum": ["nash", "social", "compare", "table1", "example1"]},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "required": list(_PARAM_FIELDS),
            "properties": {k: {"type": "number"} for k in _PARAM_FIELDS},
        },
        "population": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "uniform": {"type": "number"},
                "gains": {"type": "array", "items": {"type": "number"}},
                "mixture": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
                "n_firms": {"type": "integer", "minimum": 1},
                "sample_seed": {"type": "integer"},
            },
        },
        "init": {
            "type": "object",
            "additionalProperties": False,
            "required": ["p0", "q0_mean"],
            "properties": {
                "p0": {"type": "number"},
                "q0_mean": {"type": "number"},
                "q0_var": {"type": "number"},
                "truncate_initial_output": {"type": "boolean"},
            },
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dt", "horizon", "n_paths", "seed"],
            "properties": {
                "dt": {"type": "number"},
                "horizon": {"type": "number"},
                "n_paths": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "threads": {"type": "integer", "minimum": 1},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["param", "values"],
            "properties": {
                "param": {"enum": list(_PARAM_FIELDS)},
                "values": {"type": "array", "items": {"type": "number"}},
            },
        },
        "outputs": {"type": "string"},
    },
}


def _sig12(x):
    return float(f"{float(x):.12g}")


def _jsonable(obj):
    """Round every float to 12 significant digits; expand complex values."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _sig12(obj.real), "im": _sig12(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        return _sig12(obj)
    if isinstance(obj, (int, np.integer, str, bool)) or obj is None:
        return obj
    return str(obj)


def _tag(value, provenance, stderr=None):
    rec = {"value": _jsonable(value), "provenance": provenance}
    if stderr is not None:
        rec["stderr"] = _sig12(stderr)
    return rec


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, columns):
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(f"{v:.12g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config validation failed: {exc.message}") from exc
    return raw


def _build_params(cfg, overrides=None):
    fields = dict(cfg["params"])
    if overrides:
        fields.update(overrides)
    return MarketParams(**fields)


def _build_init(cfg):
    d = cfg["init"]
    return InitialConditions(
        p0=d["p0"],
        q0_mean=d["q0_mean"],
        q0_var=d.get("q0_var", 0.0),
        truncate_initial_output=d.get("truncate_initial_output", False),
    )


def _build_population(cfg):
    d = cfg.get("population", {"uniform": 1.0, "n_firms": 1})
    n = d.get("n_firms", 1)
    if "uniform" in d:
        return Population.uniform(d["uniform"], n), float(d["uniform"])
    if "gains" in d:
        gains = tuple(d["gains"])
        return Population(gains=gains, limit_dist=empirical_distribution(gains)), None
    if "mixture" in d:
        rng = np.random.default_rng(d.get("sample_seed", 0))
        return Population.sampled(d["mixture"], n, rng), None
    raise ConfigError("population needs one of: uniform, gains, mixture")


def _build_sim_config(cfg, population, seed=None, threads=None):
    if "sim" not in cfg:
        return None
    d = cfg["sim"]
    return simulate.SimConfig(
        n_firms=len(population.gains),
        dt=d["dt"],
        horizon=d["horizon"],
        n_paths=d["n_paths"],
        seed=seed if seed is not None else d["seed"],
        threads=threads if threads is not None else d.get("threads", 1),
    )


def _spectral_record(limit, kind):
    spec = limit.spectral
    rec = {
        "kind": kind,
        "steady_state": limit.z,
        "eigenvalues": spec.eigenvalues if spec is not None else None,
        "stable_count": spec.stable_count if spec is not None else None,
        "a_coeffs": limit.a_coeffs,
    }
    if kind == "nash":
        rec["contraction_bound"] = limit.contraction_bound
        rec["routh_first_column"] = limit.diagnostics.get("routh_first_column")
        if spec is not None:
            rec["a_coeffs_rounded_basis"] = nash.rounded_basis_coefficients(limit)
    else:
        rec["routh_first_column_quartic"] = limit.diagnostics.get(
            "routh_first_column_quartic"
        )
    return rec


def compare_report(nash_limit, social_limit):
    """Steady states, asymptotic costs and their signed differences."""
    if nash_limit.params != social_limit.params:
        raise ParamsMismatchError(
            "nash and social solutions use different parameters"
        )
    dp = social_limit.z[0] - nash_limit.z[0]
    dq = social_limit.z[3] - nash_limit.z[1]
    dj = social_limit.j_soc_inf - nash_limit.j_nash_inf
    return {
        "price_steady": {"nash": nash_limit.z[0], "social": social_limit.z[0],
                         "diff": dp, "social_higher": bool(dp > 0)},
        "output_steady": {"nash": nash_limit.z[1], "social": social_limit.z[3],
                          "diff": dq, "social_lower": bool(dq < 0)},
        "j_inf": {"nash": nash_limit.j_nash_inf, "social": social_limit.j_soc_inf,
                  "diff": dj, "social_lower": bool(dj < 0)},
    }


def _sim_summary(res):
    return {
        "social_cost": _tag(res.social_cost, "monte_carlo",
                            stderr=float(res.cost_std_errors.mean())),
        "mf_errors": {k: _tag(v, "monte_carlo") for k, v in res.mf_errors.items()},
        "tail_bound": _tag(res.tail_bound, "quadrature"),
    }


def _write_sim_paths(path, res):
    header = ["t", "p_mean", "q_avg_mean"]
    cols = [res.times, res.price_path_mean, res.avg_output_path]
    if res.paths is not None:
        for q, name in ((0.1, "q10"), (0.9, "q90")):
            header += [f"p_{name}", f"q_avg_{name}"]
            cols += [np.quantile(res.paths.p, q, axis=0),
                     np.quantile(res.paths.q_avg, q, axis=0)]
    _write_csv(path, header, cols)


def _solve_one(mode, params, population, uniform_b, init):
    if uniform_b is not None:
        if mode == "nash":
            return nash.solve_uniform(params, uniform_b, init)
        return social.solve_social_uniform(params, uniform_b, init)
    if mode == "nash":
        return nash.solve_fixedpoint(params, population, init)
    return social.solve_social_fixedpoint(params, population, init)


def _run_mode_single(cfg, out, mode, seed, threads):
    params = _build_params(cfg)
    init = _build_init(cfg)
    population, uniform_b = _build_population(cfg)
    limit = _solve_one(mode, params, population, uniform_b, init)

    if mode == "nash":
        _write_csv(out / "limit_paths.csv", ["t", "p_bar", "q_bar", "s"],
                   [limit.times, limit.p, limit.q, limit.s])
        j_key, j_val = "j_nash_inf", limit.j_nash_inf
    else:
        _write_csv(out / "limit_paths.csv",
                   ["t", "p_bar", "q_bar", "s1", "s2", "v_bar"],
                   [limit.times, limit.p, limit.q, limit.s1, limit.s2, limit.v])
        j_key, j_val = "j_soc_inf", limit.j_soc_inf
    _write_json(out / "spectral.json", _spectral_record(limit, mode))

    summary = {"mode": mode}
    if j_val is not None:
        summary[j_key] = _tag(j_val, "closed_form")
        summary["expected_cost"] = _tag(
            limit.diagnostics.get("expected_cost"), "closed_form"
        )
    if mode == "nash":
        summary["contraction_bound"] = _tag(limit.contraction_bound, "closed_form")

    sim_cfg = _build_sim_config(cfg, population, seed, threads)
    if sim_cfg is not None:
        res = (simulate.simulate_nash if mode == "nash" else simulate.simulate_social)(
            params, population, init, limit, sim_cfg
        )
        _write_sim_paths(out / "sim_paths.csv", res)
        summary["simulation"] = _sim_summary(res)
    _write_json(out / "summary.json", summary)


def _run_compare(cfg, out, seed, threads):
    params = _build_params(cfg)
    init = _build_init(cfg)
    population, uniform_b = _build_population(cfg)
    lim_n = _solve_one("nash", params, population, uniform_b, init)
    lim_s = _solve_one("social", params, population, uniform_b, init)
    t = lim_n.times
    s1 = np.interp(t, lim_s.times, lim_s.s1, right=lim_s.z[1])
    _write_csv(
        out / "limit_paths.csv",
        ["t", "p_nash", "q_nash", "s_nash", "p_social", "q_social", "s1_social"],
        [t, lim_n.p, lim_n.q, lim_n.s,
         np.interp(t, lim_s.times, lim_s.p, right=lim_s.z[0]),
         np.interp(t, lim_s.times, lim_s.q, right=lim_s.z[3]), s1],
    )
    _write_json(out / "spectral.json", {
        "nash": _spectral_record(lim_n, "nash"),
        "social": _spectral_record(lim_s, "social"),
    })
    summary = {"mode": "compare", "comparison": compare_report(lim_n, lim_s)}
    sim_cfg = _build_sim_config(cfg, population, seed, threads)
    if sim_cfg is not None:
        res_n = simulate.simulate_nash(params, population, init, lim_n, sim_cfg)
        res_s = simulate.simulate_social(params, population, init, lim_s, sim_cfg)
        _write_csv(
            out / "sim_paths.csv",
            ["t", "p_mean_nash", "q_avg_nash", "p_mean_social", "q_avg_social"],
            [res_n.times, res_n.price_path_mean, res_n.avg_output_path,
             res_s.price_path_mean, res_s.avg_output_path],
        )
        summary["simulation"] = {"nash": _sim_summary(res_n),
                                 "social": _sim_summary(res_s)}
    _write_json(out / "summary.json", summary)


def _run_table1(cfg, out):
    init = _build_init(cfg)
    _, uniform_b = _build_population(cfg)
    b = uniform_b if uniform_b is not None else 1.0
    sweep = cfg.get("sweep")
    alphas = tuple(sweep["values"]) if sweep and sweep["param"] == "alpha" \
        else TABLE1_ALPHAS
    j_nash, j_soc = [], []
    for alpha in alphas:
        params = _build_params(cfg, {"alpha": alpha})
        j_nash.append(nash.solve_uniform(params, b, init).j_nash_inf)
        j_soc.append(social.solve_social_uniform(params, b, init).j_soc_inf)
    lines = ["quantity," + ",".join(f"alpha={a:.12g}" for a in alphas),
             "j_nash_inf," + ",".join(f"{v:.12g}" for v in j_nash),
             "j_soc_inf," + ",".join(f"{v:.12g}" for v in j_soc)]
    (out / "table1.csv").write_text("\n".join(lines) + "\n")
    _write_json(out / "summary.json", {
        "mode": "table1",
        "alphas": list(alphas),
        "j_nash_inf": _tag(j_nash, "closed_form"),
        "j_soc_inf": _tag(j_soc, "closed_form"),
    })


def _run_example1(cfg, out):
    params = _build_params(cfg)
    init = _build_init(cfg)
    _, uniform_b = _build_population(cfg)
    b = uniform_b if uniform_b is not None else 1.0
    lim_n = nash.solve_uniform(params, b, init)
    lim_s = social.solve_social_uniform(params, b, init)
    _write_json(out / "spectral.json", {
        "nash": _spectral_record(lim_n, "nash"),
        "social": _spectral_record(lim_s, "social"),
    })
    _write_csv(
        out / "limit_paths.csv",
        ["t", "p_nash", "q_nash", "s_nash", "p_social", "q_social",
         "s1_social", "s2_social", "v_social"],
        [lim_n.times, lim_n.p, lim_n.q, lim_n.s,
         lim_s.p, lim_s.q, lim_s.s1, lim_s.s2, lim_s.v],
    )
    _write_json(out / "summary.json", {
        "mode": "example1",
        "comparison": compare_report(lim_n, lim_s),
        "j_nash_inf": _tag(lim_n.j_nash_inf, "closed_form"),
        "j_soc_inf": _tag(lim_s.j_soc_inf, "closed_form"),
        "contraction_bound": _tag(lim_n.contraction_bound, "closed_form"),
    })


def run(cfg, out_dir=None, seed=None, threads=None) -> int:
    """Execute a validated config; returns the process exit code."""
    out = Path(out_dir or cfg.get("outputs", "."))
    out.mkdir(parents=True, exist_ok=True)
    mode = cfg["mode"]
    try:
        if mode in ("nash", "social"):
            _run_mode_single(cfg, out, mode, seed, threads)
        elif mode == "compare":
            _run_compare(cfg, out, seed, threads)
        elif mode == "table1":
            _run_table1(cfg, out)
        else:
            _run_example1(cfg, out)
    except (UnstableStepError, RiccatiBlowupError) as exc:
        _emit_error(exc)
        return EXIT_SIM
    except (ConfigError, ParameterError) as exc:
        _emit_error(exc)
        return EXIT_CONFIG
    except MfgError as exc:
        _emit_error(exc)
        return EXIT_SOLVER
    return EXIT_OK


def _emit_error(exc):
    record = {"error": getattr(exc, "code", "ERROR"), "message": str(exc)}
    details = getattr(exc, "details", None)
    if details:
        record["details"] = _jsonable(details)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def _parser():
    parser = argparse.ArgumentParser(
        prog="mfg-sticky",
        description="Sticky-price market mean-field solver and simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "nash", "social", "compare", "table1", "example1"):
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override simulation seed")
        p.add_argument("--threads", type=int, default=None,
                       help="simulator thread count")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command != "run":
            cfg["mode"] = args.command
    except ConfigError as exc:
        _emit_error(exc)
        return EXIT_CONFIG
    return run(cfg, out_dir=args.out, seed=args.seed, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
