"""Bayesian optimization with an Expected Improvement acquisition.

Minimization throughout. Each round the surrogate GP is refit on every
observation so far with inputs scaled to ``[-1, 1]`` by the search bounds and
labels scaled to ``[-1, 1]`` by the observed range; EI is evaluated on a seeded
uniform candidate set and the best candidate is evaluated next.
"""

from __future__ import annotations

import csv
import json
import math
import shlex
import subprocess
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erfc

from .errors import ObjectiveError
from .featuremap import ScalingSpec, scale_inputs
from .gp import QuantumKernel, RBFKernel, fit, predict, train_rbf
from .qkernel import QuantumKernelConfig
from .simulator import derive_seed

__all__ = [
    "Bounds",
    "AcquisitionConfig",
    "BoTrace",
    "NoisyObjective",
    "CommandObjective",
    "expected_improvement",
    "propose_next",
    "bo_run",
    "random_search",
    "branin",
    "xsinx",
    "BRANIN_BOUNDS",
    "BRANIN_MINIMUM",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# default observation noise for black-box objectives, in scaled label units
BLACK_BOX_NOISE_VAR = 1e-4

# seed-derivation contexts
_CTX_INIT, _CTX_THETA, _CTX_ROUND = 11, 12, 13


@dataclass(frozen=True, eq=False)
class Bounds:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(~(lo < hi)):
            raise ValueError(f"bounds need lo < hi in every dimension, got {lo}, {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(pairs[:, 0], pairs[:, 1])

    @property
    def dim(self):
        return self.lo.size

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=(n, self.dim))

    def scaling(self):
        return ScalingSpec(self.lo, self.hi)

    def to_list(self):
        return [[float(a), float(b)] for a, b in zip(self.lo, self.hi)]


@dataclass(frozen=True)
class AcquisitionConfig:
    lam: float = 0.1
    num_candidates: int = 2048

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("exploration parameter must be non-negative")
        if self.num_candidates < 1:
            raise ValueError("need at least one candidate")

    def to_dict(self):
        return {"lambda": self.lam, "num_candidates": self.num_candidates}


def _norm_cdf(z):
    return 0.5 * erfc(-z / _SQRT2)


def _norm_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def expected_improvement(mu, sigma, best, lam=0.0):
    """Expected improvement below ``best`` for a Gaussian prediction.

    ``EI = (best - mu - lam) * Phi(Z) + sigma * phi(Z)`` with
    ``Z = (best - mu - lam) / sigma``, and ``EI = 0`` wherever ``sigma == 0``.
    Works elementwise on arrays; returns a float for scalar input.
    """
    mu, sigma, best = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, sigma, best)))
    if np.any(sigma < 0):
        raise ValueError("sigma must be non-negative")
    delta = best - mu - lam
    pos = sigma > 0
    safe = np.where(pos, sigma, 1.0)
    z = delta / safe
    ei = np.where(pos, delta * _norm_cdf(z) + safe * _norm_pdf(z), 0.0)
    # guard against -0.0 and round-off far in the left tail
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def propose_next(model, bounds, acq, seed, best=None):
    """Candidate with the largest EI under ``model``.

    ``model`` must have been fitted on inputs scaled by ``bounds`` (see
    ``Bounds.scaling``). ``best`` and ``acq.lam`` are in the model's label
    units; ``best`` defaults to the smallest training label. Ties go to the
    lowest candidate index. Returns the candidate in raw coordinates.
    """
    rng = np.random.default_rng(seed)
    cand = bounds.sample(rng, acq.num_candidates)
    if best is None:
        best = float(np.min(model.y_train))
    post = predict(model, scale_inputs(cand, bounds.scaling()), full_cov=False)
    ei = expected_improvement(post.mean, post.std, best, acq.lam)
    return cand[int(np.argmax(ei))]


@dataclass
class BoTrace:
    """Every evaluation of an optimization run.

    The first ``n_init`` rows are the random initial design.
    """

    points: np.ndarray
    observations: np.ndarray
    n_init: int
    seed: int
    config: dict = field(default_factory=dict)

    @property
    def best_so_far(self):
        return np.minimum.accumulate(self.observations)

    @property
    def n_evals(self):
        return self.observations.size

    def to_csv(self, path):
        d = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", *(f"x{i}" for i in range(d)), "observation", "best_so_far"])
            for i, (x, y, b) in enumerate(zip(self.points, self.observations, self.best_so_far)):
                w.writerow([i + 1, *(repr(float(v)) for v in x), repr(float(y)), repr(float(b))])

    def to_json(self, path):
        payload = {"seed": self.seed, "n_init": self.n_init, "n_evals": self.n_evals, "config": self.config}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _init_design(bounds, n, seed):
    return bounds.sample(np.random.default_rng(derive_seed(seed, _CTX_INIT)), n)


def _observe(objective, x, points, obs, n_init, seed, config):
    y = float(objective(x))
    if not np.isfinite(y):
        trace = BoTrace(np.array(points).reshape(-1, len(x)), np.array(obs), n_init, seed, config)
        raise ObjectiveError(f"objective returned {y!r} at {list(map(float, x))}", trace)
    points.append(np.asarray(x, dtype=float))
    obs.append(y)


def bo_run(objective, bounds, surrogate, acq, n_init=5, n_iter=50, seed=0, noise_var=None):
    """Run Bayesian optimization and return the full evaluation trace.

    Parameters
    ----------
    objective : callable
        Maps a point (1-D array) to a float.
    bounds : Bounds
    surrogate : RBFKernel or QuantumKernelConfig
        RBF surrogates are re-trained by maximum likelihood every round. For
        quantum surrogates a configuration without ``theta`` gets angles drawn
        uniformly from ``[0, 2 pi)`` once, then held fixed.
    acq : AcquisitionConfig
        ``acq.lam`` is in objective units and rescaled with the labels.
    noise_var : float, optional
        Observation noise variance in objective units. When omitted a fixed
        ``1e-4`` in scaled label units is used.
    """
    if n_init < 1 or n_iter < 0:
        raise ValueError("need n_init >= 1 and n_iter >= 0")
    if isinstance(surrogate, QuantumKernelConfig) and surrogate.theta is None:
        theta = np.random.default_rng(derive_seed(seed, _CTX_THETA)).uniform(
            0.0, 2.0 * np.pi, surrogate.spec.num_params
        )
        surrogate = surrogate.with_theta(theta)
    config = {
        "bounds": bounds.to_list(),
        "acquisition": acq.to_dict(),
        "n_init": n_init,
        "n_iter": n_iter,
        "noise_var": noise_var,
        "surrogate": _surrogate_dict(surrogate),
    }
    input_scaling = bounds.scaling()
    points, obs = [], []
    for x in _init_design(bounds, n_init, seed):
        _observe(objective, x, points, obs, n_init, seed, config)

    for it in range(n_iter):
        round_seed = derive_seed(seed, _CTX_ROUND, it)
        X = scale_inputs(np.array(points), input_scaling)
        y = np.array(obs)
        lo, hi = float(y.min()), float(y.max())
        if not hi > lo:
            lo, hi = lo - 1.0, hi + 1.0
        half_range = 0.5 * (hi - lo)
        ys = (y - lo) / half_range - 1.0
        nv = BLACK_BOX_NOISE_VAR if noise_var is None else noise_var / half_range**2
        if isinstance(surrogate, QuantumKernelConfig):
            kernel = QuantumKernel(surrogate.with_seed(round_seed))
        else:
            kernel = train_rbf(X, ys, nv, seed=round_seed)
        model = fit(kernel, X, ys, nv)
        scaled_acq = replace(acq, lam=acq.lam / half_range)
        x_next = propose_next(model, bounds, scaled_acq, round_seed, best=float(ys.min()))
        _observe(objective, x_next, points, obs, n_init, seed, config)

    return BoTrace(np.array(points), np.array(obs), n_init, seed, config)


def _surrogate_dict(surrogate):
    if isinstance(surrogate, QuantumKernelConfig):
        return {"type": "QUANTUM", **surrogate.to_dict()}
    if isinstance(surrogate, RBFKernel):
        return {"type": "RBF", "trained_each_round": True}
    raise TypeError(f"unsupported surrogate {surrogate!r}")


def random_search(objective, bounds, n_total, seed=0):
    """Uniform random sampling; shares its first points with ``bo_run(seed=seed)``."""
    if n_total < 1:
        raise ValueError("n_total must be >= 1")
    config = {"bounds": bounds.to_list(), "n_total": n_total, "surrogate": {"type": "RANDOM"}}
    points, obs = [], []
    for x in _init_design(bounds, n_total, seed):
        _observe(objective, x, points, obs, n_total, seed, config)
    return BoTrace(np.array(points), np.array(obs), n_total, seed, config)


BRANIN_BOUNDS = Bounds([-5.0, 0.0], [10.0, 15.0])
BRANIN_MINIMUM = 0.39788735772973816


def branin(x1, x2, a=1.0, b=5.1 / (4 * np.pi**2), c=5 / np.pi, r=6.0, s=10.0, t=1 / (8 * np.pi)):
    return a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * np.cos(x1) + s


def xsinx(x):
    return x * np.sin(x)


class NoisyObjective:
    """Wrap ``fn(point) -> float`` and add Gaussian noise from a seeded stream.

    Two instances built with the same seed return identical observations for
    identical call sequences, which is what makes paired runs comparable.
    """

    def __init__(self, fn, noise_std=0.0, seed=0):
        self.fn = fn
        self.noise_std = float(noise_std)
        self._rng = np.random.default_rng(seed)

    def __call__(self, x):
        y = float(self.fn(np.asarray(x, dtype=float)))
        if self.noise_std > 0:
            y += self.noise_std * float(self._rng.standard_normal())
        return y


def branin_objective(noise_std=0.0, seed=0):
    return NoisyObjective(lambda x: branin(x[0], x[1]), noise_std, seed)


class CommandObjective:
    """Objective evaluated by a long-running external command.

    Each evaluation writes the point as one whitespace-separated line to the
    command's stdin and reads one decimal number per line from its stdout.
    Dimensions listed in ``integer_dims`` are rounded before being sent.
    """

    def __init__(self, command, integer_dims=()):
        self.command = command
        self.integer_dims = tuple(integer_dims)
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )

    def __call__(self, x):
        x = np.array(x, dtype=float)
        for i in self.integer_dims:
            x[i] = np.round(x[i])
        if self._proc.poll() is not None:
            raise ObjectiveError(f"objective command exited with status {self._proc.returncode}")
        self._proc.stdin.write(" ".join(repr(float(v)) for v in x) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise ObjectiveError("objective command closed its output")
        try:
            return float(line.strip())
        except ValueError:
            raise ObjectiveError(f"objective command wrote {line.strip()!r}, expected a number") from None

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
