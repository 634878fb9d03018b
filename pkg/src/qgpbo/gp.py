"""Gaussian process regression with quantum or RBF kernels.

The prior mean is zero; callers are expected to scale labels to ``[-1, 1]``
first. Linear algebra goes through a Cholesky factor of ``K + noise_var * I``
with a small escalating jitter for numerically singular Gram matrices.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .errors import FitError, InitializationError, NotPositiveDefiniteError
from .qkernel import KernelMode, QuantumKernelConfig, gram, regularize_cutoff

__all__ = [
    "RBFKernel",
    "QuantumKernel",
    "GpModel",
    "Posterior",
    "VarianceClampWarning",
    "fit",
    "predict",
    "log_marginal_likelihood",
    "train_mll",
    "train_rbf",
    "model_summary",
]

JITTER_LEVELS = (1e-10, 1e-8, 1e-6)
NM_SIMPLEX_SCALE = 0.1
NM_BUDGET = 150
# test points per joint-regularized block when only marginals are needed
JOINT_BLOCK = 256

# seed contexts for the shot noise of the different kernel blocks
_CTX_TRAIN, _CTX_CROSS, _CTX_TEST = 0, 1, 2


class VarianceClampWarning(RuntimeWarning):
    """Posterior variances went noticeably negative and were clamped to zero."""


@dataclass(frozen=True)
class RBFKernel:
    """``amplitude * exp(-|x - x'|**2 / (2 * lengthscale**2))``."""

    lengthscale: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not (self.lengthscale > 0 and self.amplitude > 0):
            raise ValueError("RBF lengthscale and amplitude must be positive")

    def __call__(self, X, X2=None):
        X = np.atleast_2d(X)
        X2 = X if X2 is None else np.atleast_2d(X2)
        sq = (
            np.sum(X**2, axis=1)[:, None]
            + np.sum(X2**2, axis=1)[None, :]
            - 2.0 * X @ X2.T
        )
        np.maximum(sq, 0.0, out=sq)
        return self.amplitude * np.exp(-0.5 * sq / self.lengthscale**2)

    def train_matrix(self, X):
        return self(X), 0.0, None

    def cross_matrix(self, X, X2):
        return self(X, X2)

    def test_matrix(self, X):
        return self(X)

    def diag(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.amplitude)

    def to_dict(self):
        return {"type": "RBF", "lengthscale": self.lengthscale, "amplitude": self.amplitude}


@dataclass(frozen=True, eq=False)
class QuantumKernel:
    """Fidelity quantum kernel.

    With a SAMPLED configuration the training Gram is cutoff-regularized in
    ``fit``, and ``predict`` regularizes the joint train+test Gram so that the
    posterior is computed from one positive semidefinite matrix.
    """

    config: QuantumKernelConfig

    @property
    def joint_regularized(self):
        return self.config.mode is KernelMode.SAMPLED

    def train_matrix(self, X):
        """Training Gram, its clipped mass, and the unregularized Gram (SAMPLED only)."""
        G = gram(X, None, self.config, context=_CTX_TRAIN)
        if not self.joint_regularized:
            return G.entries, 0.0, None
        R = regularize_cutoff(G)
        return R.entries, R.clipped_mass, G.entries

    def cross_matrix(self, X, X2, block=0):
        return gram(X, X2, self.config, context=(_CTX_CROSS, block)).entries

    def test_matrix(self, X, block=0):
        return gram(X, None, self.config, context=(_CTX_TEST, block)).entries

    def diag(self, X):
        # fidelity of a pure state with itself
        return np.ones(np.atleast_2d(X).shape[0])

    def to_dict(self):
        return {"type": "QUANTUM", **self.config.to_dict()}


@dataclass(frozen=True, eq=False)
class GpModel:
    """A fitted GP. ``chol_factor @ chol_factor.T == K + (noise_var + jitter) * I``."""

    kernel: object
    X_train: np.ndarray
    y_train: np.ndarray
    noise_var: float
    chol_factor: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0
    clipped_mass: float = 0.0
    K_raw: np.ndarray | None = None

    @property
    def n(self):
        return self.y_train.size


@dataclass(frozen=True, eq=False)
class Posterior:
    mean: np.ndarray
    std: np.ndarray
    cov: np.ndarray | None = None


def _as_points(X):
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def _cholesky(A):
    mean_diag = float(np.mean(np.diag(A)))
    scale = mean_diag if mean_diag > 0 else 1.0
    eye = np.eye(A.shape[0])
    for level in JITTER_LEVELS:
        jitter = level * scale
        try:
            return np.linalg.cholesky(A + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    min_eig = float(np.linalg.eigvalsh(A)[0])
    raise NotPositiveDefiniteError(
        f"Cholesky failed with jitter up to {JITTER_LEVELS[-1]:g} x mean diagonal; "
        f"minimum eigenvalue {min_eig:.3e}",
        min_eig,
    )


def fit(kernel, X, y, noise_var):
    """Condition a zero-mean GP on ``(X, y)``.

    Parameters
    ----------
    kernel : RBFKernel or QuantumKernel
    X : array_like, shape (n, d)
        Training inputs (already scaled for quantum kernels).
    y : array_like, shape (n,)
    noise_var : float
        Observation noise variance added to the diagonal.

    Returns
    -------
    GpModel
    """
    X = _as_points(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size < 1 or X.shape[0] != y.size:
        raise ValueError(f"need n >= 1 matching points and labels, got {X.shape[0]} and {y.size}")
    if noise_var < 0:
        raise ValueError("noise_var must be non-negative")
    K, clipped, K_raw = kernel.train_matrix(X)
    L, jitter = _cholesky(K + noise_var * np.eye(y.size))
    alpha = cho_solve((L, True), y)
    return GpModel(kernel, X, y, float(noise_var), L, alpha, jitter, clipped, K_raw)


def predict(model, X_star, full_cov=True):
    """Posterior mean, standard deviation and (optionally) covariance at ``X_star``.

    ``full_cov=False`` skips the test-test covariance and only returns the
    marginal standard deviations.
    """
    X_star = _as_points(X_star)
    if X_star.shape[1] != model.X_train.shape[1]:
        raise ValueError(
            f"test points have {X_star.shape[1]} features, model expects {model.X_train.shape[1]}"
        )
    if X_star.shape[0] < 1:
        raise ValueError("no test points")
    if model.K_raw is not None:
        return _predict_joint(model, X_star, full_cov)
    Ks = model.kernel.cross_matrix(model.X_train, X_star)
    mean = Ks.T @ model.alpha
    v = solve_triangular(model.chol_factor, Ks, lower=True)
    if full_cov:
        cov = model.kernel.test_matrix(X_star) - v.T @ v
        cov = 0.5 * (cov + cov.T)
        var = np.diag(cov).copy()
    else:
        cov = None
        var = model.kernel.diag(X_star) - np.sum(v**2, axis=0)
    return _posterior(mean, var, cov)


def _posterior(mean, var, cov):
    if var.min() < -1e-6:
        warnings.warn(
            f"posterior variance {var.min():.2e} clamped to zero; kernel may be under-regularized",
            VarianceClampWarning,
            stacklevel=3,
        )
    return Posterior(mean, np.sqrt(np.maximum(var, 0.0)), cov)


def _predict_joint(model, X_star, full_cov):
    # Regularize [[K_tt, K_ts], [K_st, K_ss]] as a whole; test points are
    # processed in blocks so the eigendecomposition stays small.
    n, m = model.n, X_star.shape[0]
    block = m if full_cov else JOINT_BLOCK
    means, variances = [], []
    cov = None
    for b, start in enumerate(range(0, m, block)):
        Xb = X_star[start:start + block]
        k = Xb.shape[0]
        G = np.empty((n + k, n + k))
        G[:n, :n] = model.K_raw
        G[:n, n:] = model.kernel.cross_matrix(model.X_train, Xb, block=b)
        G[n:, :n] = G[:n, n:].T
        G[n:, n:] = model.kernel.test_matrix(Xb, block=b)
        G = regularize_cutoff(G).entries
        L, _ = _cholesky(G[:n, :n] + model.noise_var * np.eye(n))
        alpha = cho_solve((L, True), model.y_train)
        v = solve_triangular(L, G[:n, n:], lower=True)
        means.append(G[:n, n:].T @ alpha)
        if full_cov:
            cov = G[n:, n:] - v.T @ v
            cov = 0.5 * (cov + cov.T)
            variances.append(np.diag(cov).copy())
        else:
            variances.append(np.diag(G[n:, n:]) - np.sum(v**2, axis=0))
    return _posterior(np.concatenate(means), np.concatenate(variances), cov)


def log_marginal_likelihood(model):
    """``-y^T alpha / 2 - log det(K + noise) / 2 - n log(2 pi) / 2``."""
    return float(
        -0.5 * model.y_train @ model.alpha
        - np.sum(np.log(np.diag(model.chol_factor)))
        - 0.5 * model.n * np.log(2.0 * np.pi)
    )


class _BestSoFar:
    """Objective wrapper recording the best value seen after each evaluation."""

    def __init__(self, fn):
        self.fn = fn
        self.history = []
        self.best_x = None
        self.best = np.inf

    def __call__(self, p):
        val = self.fn(p)
        if val < self.best:
            self.best, self.best_x = val, np.array(p, copy=True)
        self.history.append(self.best)
        return val


_PENALTY = 1e10


def _nelder_mead(fn, x0, budget, scale=NM_SIMPLEX_SCALE):
    x0 = np.asarray(x0, dtype=float)
    simplex = np.vstack([x0, x0 + scale * np.eye(x0.size)])
    minimize(
        fn,
        x0,
        method="Nelder-Mead",
        options={"maxfev": budget, "initial_simplex": simplex, "xatol": 1e-8, "fatol": 1e-10},
    )


def train_mll(spec, X, y, noise_var, theta0=None, budget=NM_BUDGET, seed=0,
              mode=KernelMode.EXACT, shots=None, train_noise=False):
    """Fit feature-map angles by maximizing the marginal log-likelihood.

    Nelder-Mead simplex search (initial step 0.1 rad) with at most ``budget``
    likelihood evaluations. When ``theta0`` is omitted it is drawn uniformly
    from ``[0, 2 pi)`` using ``seed``.

    Returns
    -------
    theta : ndarray
        Best parameters found.
    history : list of float
        Best-so-far negative log-likelihood after each evaluation.
    noise_var : float
        Only returned when ``train_noise`` is set; the fitted noise variance.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    X = _as_points(X)
    if theta0 is None:
        theta0 = np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, spec.num_params)
    theta0 = np.asarray(theta0, dtype=float)
    base = QuantumKernelConfig(spec, theta0, mode, shots, master_seed=seed)
    n_theta = theta0.size

    def nll(p):
        nv = float(np.exp(p[n_theta])) if train_noise else noise_var
        try:
            model = fit(QuantumKernel(base.with_theta(p[:n_theta])), X, y, nv)
        except (np.linalg.LinAlgError, ValueError):
            return _PENALTY
        val = -log_marginal_likelihood(model)
        return val if np.isfinite(val) else _PENALTY

    p0 = theta0
    if train_noise:
        p0 = np.append(theta0, np.log(max(noise_var, 1e-8)))
    tracker = _BestSoFar(nll)
    if not tracker(p0) < _PENALTY:
        raise InitializationError("negative log-likelihood is not finite at the initial parameters")
    if budget > 1:
        _nelder_mead(tracker, p0, budget - 1)
    best = tracker.best_x
    history = tracker.history[:budget]
    if train_noise:
        return best[:n_theta], history, float(np.exp(best[n_theta]))
    return best, history


_RBF_LOG_BOUNDS = np.log([[1e-3, 1e3], [1e-4, 1e4]])


def train_rbf(X, y, noise_var, seed=0, n_starts=5, budget=200):
    """Maximum-likelihood RBF lengthscale and amplitude.

    Optimizes ``(log lengthscale, log amplitude)`` with Nelder-Mead from
    ``n_starts`` seeded initial points and keeps the best result.
    """
    X = _as_points(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size < 2:
        raise FitError("RBF training needs at least two observations")
    if np.all(X == X[0]):
        raise FitError("all training inputs are identical")
    lo, hi = _RBF_LOG_BOUNDS[:, 0], _RBF_LOG_BOUNDS[:, 1]

    def nll(p):
        p = np.clip(p, lo, hi)
        try:
            model = fit(RBFKernel(float(np.exp(p[0])), float(np.exp(p[1]))), X, y, noise_var)
        except np.linalg.LinAlgError:
            return _PENALTY
        val = -log_marginal_likelihood(model)
        return val if np.isfinite(val) else _PENALTY

    rng = np.random.default_rng(seed)
    starts = np.column_stack([
        rng.uniform(np.log(0.05), np.log(2.0), n_starts),
        rng.uniform(np.log(0.1), np.log(2.0), n_starts),
    ])
    best_p, best_val = None, np.inf
    for p0 in starts:
        tracker = _BestSoFar(nll)
        tracker(p0)
        _nelder_mead(tracker, p0, budget, scale=0.5)
        if tracker.best < best_val:
            best_val, best_p = tracker.best, np.clip(tracker.best_x, lo, hi)
    if best_p is None:
        raise FitError("RBF likelihood is not finite at any initialization")
    return RBFKernel(float(np.exp(best_p[0])), float(np.exp(best_p[1])))


def model_summary(model, scaling=None, spec=None):
    """JSON-ready description of a fitted model."""
    out = {
        "kernel": model.kernel.to_dict(),
        "noise_var": model.noise_var,
        "jitter": model.jitter,
        "clipped_mass": model.clipped_mass,
        "n_train": model.n,
        "log_marginal_likelihood": log_marginal_likelihood(model),
    }
    if scaling is not None:
        out["scaling"] = scaling.to_dict()
    if spec is not None:
        out["feature_map"] = spec.to_dict()
    return out


def dumps_summary(summary):
    return json.dumps(summary, indent=2, sort_keys=True)
