"""The two experiment pipelines: 1-D regression and the optimization benchmark.

Both take a plain configuration dict (see ``DEFAULTS``) so the CLI, the
acceptance tests and the demo scripts drive exactly the same code.
"""

from __future__ import annotations

import copy
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .bayesopt import (
    BRANIN_BOUNDS,
    AcquisitionConfig,
    Bounds,
    CommandObjective,
    NoisyObjective,
    bo_run,
    branin,
    random_search,
    xsinx,
)
from .errors import ConfigError
from .featuremap import (
    FeatureMapSpec,
    ScalingSpec,
    scale_inputs,
    scale_labels,
    unscale_labels,
    unscale_std,
)
from .gp import QuantumKernel, RBFKernel, fit, log_marginal_likelihood, model_summary, predict, train_mll
from .qkernel import KernelMode, QuantumKernelConfig, gram, regularize_cutoff
from .simulator import derive_seed

DEFAULTS = {
    "regress": {
        "command": "regress",
        "seed": 0,
        "feature_map": {"family": "CHEBYSHEV_HWE", "num_qubits": 4, "num_layers": 2, "input_dim": 1},
        "kernel": {"modes": ["EXACT", "SAMPLED"], "shots": 10000},
        "dataset": {
            "function": "xsinx",
            "n_train": 23,
            "n_test": 50,
            "noise_var": 0.01,
            "domain": [[0.0, 2 * math.pi]],
        },
        # GP noise variance in scaled label units; null means dataset.noise_var
        "gp": {"noise_var": None},
        "training": {"enabled": True, "budget": 150},
    },
    "bayesopt": {
        "command": "bayesopt",
        "seed": 0,
        "repetitions": 25,
        "workers": 1,
        "objective": {"name": "branin", "noise_var": 0.25, "command": None, "bounds": None, "integer_dims": []},
        "feature_map": {"family": "CHEBYSHEV_HWE", "num_qubits": 4, "num_layers": 2},
        "kernel": {"shots": 10000},
        "surrogates": ["QGP-EXACT", "QGP-SAMPLED", "RBF", "RANDOM"],
        "acquisition": {"lambda": 0.1, "num_candidates": 2048},
        "n_init": 5,
        "n_iter": 50,
    },
    "benchmark": {"command": "benchmark", "seed": 0},
}

SURROGATES = ("QGP-EXACT", "QGP-SAMPLED", "RBF", "RANDOM")
FUNCTIONS = {"xsinx": xsinx}


def resolve_config(command, user=None, overrides=None):
    """Merge defaults, a user config dict and flag overrides; validate the result."""
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}; expected one of {sorted(DEFAULTS)}")
    cfg = copy.deepcopy(DEFAULTS[command])
    for src in (user or {}), (overrides or {}):
        _merge(cfg, src, path=command)
    cfg["command"] = command
    _validate(cfg)
    return cfg


def _merge(dst, src, path):
    for key, val in src.items():
        if key not in dst:
            raise ConfigError(f"unknown config key {path}.{key}")
        if isinstance(dst[key], dict) and isinstance(val, dict):
            _merge(dst[key], val, f"{path}.{key}")
        else:
            dst[key] = val


def _validate(cfg):
    cmd = cfg["command"]
    if cmd == "benchmark":
        return
    fm = cfg["feature_map"]
    try:
        if cmd == "regress":
            FeatureMapSpec.from_dict(fm)
        else:
            FeatureMapSpec.from_dict({**fm, "input_dim": 1})
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid feature_map: {exc}") from None
    if cmd == "regress":
        ds = cfg["dataset"]
        if ds["function"] not in FUNCTIONS:
            raise ConfigError(f"dataset.function {ds['function']!r} is not one of {sorted(FUNCTIONS)}")
        if ds["n_train"] < 1 or ds["n_test"] < 1:
            raise ConfigError("dataset.n_train and dataset.n_test must be >= 1")
        for mode in cfg["kernel"]["modes"]:
            if mode not in KernelMode.__members__:
                raise ConfigError(f"kernel mode {mode!r} is not EXACT or SAMPLED")
        if "SAMPLED" in cfg["kernel"]["modes"] and not cfg["kernel"]["shots"] >= 1:
            raise ConfigError("kernel.shots must be >= 1 for SAMPLED mode")
        if cfg["training"]["budget"] < 1:
            raise ConfigError("training.budget must be >= 1")
    else:
        bad = [s for s in cfg["surrogates"] if s not in SURROGATES]
        if bad:
            raise ConfigError(f"unknown surrogate(s) {bad}; choose from {list(SURROGATES)}")
        if cfg["repetitions"] < 1 or cfg["n_init"] < 1 or cfg["n_iter"] < 0:
            raise ConfigError("repetitions and n_init must be >= 1, n_iter >= 0")
        obj = cfg["objective"]
        if obj["command"] is None and obj["name"] != "branin":
            raise ConfigError(f"objective.name {obj['name']!r} unknown; use 'branin' or objective.command")
        if obj["command"] is not None and obj["bounds"] is None:
            raise ConfigError("objective.bounds is required with an external objective command")
        try:
            AcquisitionConfig(cfg["acquisition"]["lambda"], cfg["acquisition"]["num_candidates"])
            objective_bounds(cfg)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


# -- regression -------------------------------------------------------------


def make_dataset(n_train, n_test, noise_var, seed, domain=(0.0, 2 * math.pi), fn=xsinx):
    """Sorted uniform training inputs with noisy labels, equidistant noiseless test set."""
    rng = np.random.default_rng(seed)
    lo, hi = domain
    x_train = np.sort(rng.uniform(lo, hi, n_train))
    y_train = fn(x_train) + rng.normal(0.0, math.sqrt(noise_var), n_train)
    x_test = np.linspace(lo, hi, n_test) if n_test > 1 else np.array([0.5 * (lo + hi)])
    return x_train, y_train, x_test, fn(x_test)


def r2_score(y_true, y_pred):
    ss_res = np.sum((y_true - y_pred) ** 2)
    ss_tot = np.sum((y_true - np.mean(y_true)) ** 2)
    return float(1.0 - ss_res / ss_tot) if ss_tot > 0 else float("nan")


def densest_location(x, window=4):
    """Centre of the tightest run of ``window`` consecutive sorted points."""
    x = np.sort(np.asarray(x, dtype=float))
    k = min(window, x.size) - 1
    if k < 1:
        return float(x[0])
    spans = x[k:] - x[:-k]
    i = int(np.argmin(spans))
    return float(0.5 * (x[i] + x[i + k]))


def largest_gap_midpoint(x):
    x = np.sort(np.asarray(x, dtype=float))
    gaps = np.diff(x)
    i = int(np.argmax(gaps))
    return float(x[i] + 0.5 * gaps[i])


def run_regression(cfg, theta0=None):
    """Fit the quantum GP to the configured 1-D dataset.

    Returns a dict with the dataset, the trained angles and loss history, and
    per-mode predictions and metrics (keys ``"EXACT"`` / ``"SAMPLED"``).
    """
    seed = int(cfg["seed"])
    ds = cfg["dataset"]
    (lo, hi), = ds["domain"]
    x_tr, y_tr, x_te, f_te = make_dataset(
        ds["n_train"], ds["n_test"], ds["noise_var"], seed, (lo, hi), FUNCTIONS[ds["function"]]
    )
    spec = FeatureMapSpec.from_dict(cfg["feature_map"])
    scaling = ScalingSpec([lo], [hi])
    if ds["n_train"] > 1 and y_tr.max() > y_tr.min():
        scaling = scaling.with_labels(y_tr)
    else:
        scaling = ScalingSpec([lo], [hi], float(y_tr.min()) - 1.0, float(y_tr.max()) + 1.0)
    X = scale_inputs(x_tr[:, None], scaling)
    Xt = scale_inputs(x_te[:, None], scaling)
    y = scale_labels(y_tr, scaling)
    noise_var = cfg["gp"]["noise_var"]
    noise_var = ds["noise_var"] if noise_var is None else noise_var

    if theta0 is None:
        theta0 = np.random.default_rng(derive_seed(seed, 1)).uniform(0, 2 * np.pi, spec.num_params)
    history = []
    theta = np.asarray(theta0, dtype=float)
    if cfg["training"]["enabled"]:
        theta, history = train_mll(spec, X, y, noise_var, theta0, budget=cfg["training"]["budget"], seed=seed)

    out = {
        "x_train": x_tr, "y_train": y_tr, "x_test": x_te, "f_test": f_te,
        "theta0": np.asarray(theta0, dtype=float), "theta": theta, "loss_history": history,
        "scaling": scaling, "spec": spec, "noise_var": noise_var, "modes": {},
    }
    if cfg["training"]["enabled"]:
        # exact-kernel test MSE at the untrained angles, for comparison
        init = fit(QuantumKernel(QuantumKernelConfig(spec, theta0)), X, y, noise_var)
        out["initial_mse"] = float(np.mean((unscale_labels(predict(init, Xt).mean, scaling) - f_te) ** 2))
    for mode in cfg["kernel"]["modes"]:
        shots = cfg["kernel"]["shots"] if mode == "SAMPLED" else None
        kcfg = QuantumKernelConfig(spec, theta, mode, shots, master_seed=derive_seed(seed, 2))
        model = fit(QuantumKernel(kcfg), X, y, noise_var)
        post = predict(model, Xt)
        mean = unscale_labels(post.mean, scaling)
        std = unscale_std(post.std, scaling)
        f_scaled = scale_labels(f_te, scaling)
        entry = {
            "model": model,
            "mean": mean,
            "std": std,
            "metrics": {
                "mse": float(np.mean((mean - f_te) ** 2)),
                "r2": r2_score(f_te, mean),
                "mse_scaled": float(np.mean((post.mean - f_scaled) ** 2)),
                "r2_scaled": r2_score(f_scaled, post.mean),
                "log_marginal_likelihood": log_marginal_likelihood(model),
                "clipped_mass": model.clipped_mass,
            },
        }
        if X.shape[0] > 2:
            mid, dense = largest_gap_midpoint(X[:, 0]), densest_location(X[:, 0])
            probe = predict(model, np.array([[mid], [dense]]))
            entry["metrics"]["std_gap_midpoint"] = float(probe.std[0])
            entry["metrics"]["std_densest"] = float(probe.std[1])
        G = gram(X, None, kcfg)
        entry["gram"] = regularize_cutoff(G) if mode == "SAMPLED" else G
        entry["summary"] = model_summary(model, scaling, spec)
        out["modes"][mode] = entry
    return out


# -- Bayesian optimization ----------------------------------------------------


def objective_bounds(cfg):
    obj = cfg["objective"]
    if obj["bounds"] is not None:
        return Bounds.from_pairs(obj["bounds"])
    return BRANIN_BOUNDS


def _make_objective(cfg, run_seed):
    obj = cfg["objective"]
    if obj["command"] is not None:
        return CommandObjective(obj["command"], obj["integer_dims"])
    return NoisyObjective(lambda x: branin(x[0], x[1]), math.sqrt(obj["noise_var"] or 0.0), run_seed)


def _surrogate(cfg, name, bounds):
    if name == "RBF":
        return RBFKernel()
    spec = FeatureMapSpec.from_dict({**cfg["feature_map"], "input_dim": bounds.dim})
    if name == "QGP-EXACT":
        return QuantumKernelConfig(spec)
    return QuantumKernelConfig(spec, None, KernelMode.SAMPLED, cfg["kernel"]["shots"])


def run_single(cfg, name, rep):
    """One repetition for one surrogate. Seeds depend only on (master seed, rep)."""
    run_seed = derive_seed(cfg["seed"], rep)
    bounds = objective_bounds(cfg)
    objective = _make_objective(cfg, run_seed)
    try:
        if name == "RANDOM":
            return random_search(objective, bounds, cfg["n_init"] + cfg["n_iter"], run_seed)
        acq = AcquisitionConfig(cfg["acquisition"]["lambda"], cfg["acquisition"]["num_candidates"])
        noise = cfg["objective"]["noise_var"] if cfg["objective"]["command"] is None else None
        return bo_run(objective, bounds, _surrogate(cfg, name, bounds), acq,
                      cfg["n_init"], cfg["n_iter"], run_seed, noise_var=noise)
    finally:
        if isinstance(objective, CommandObjective):
            objective.close()


def _run_job(args):
    return run_single(*args)


def run_benchmark_bo(cfg):
    """All repetitions for all surrogates: ``{surrogate: [BoTrace, ...]}``."""
    jobs = [(cfg, name, rep) for name in cfg["surrogates"] for rep in range(cfg["repetitions"])]
    workers = int(cfg.get("workers") or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_job, jobs))
    else:
        traces = [_run_job(j) for j in jobs]
    out = {name: [] for name in cfg["surrogates"]}
    for (_, name, _), tr in zip(jobs, traces):
        out[name].append(tr)
    return out


def aggregate(traces):
    """Mean and population std of best-so-far across runs, per evaluation."""
    best = np.array([t.best_so_far for t in traces])
    return best.mean(axis=0), best.std(axis=0)
