"""Fidelity quantum kernels, Gram matrices and eigenvalue-cutoff regularization.

The kernel between two scaled points is the squared overlap of their embedded
states, ``k(x, x') = |<phi(x')|phi(x)>|**2``. In ``EXACT`` mode the overlap is
read off the simulated statevectors. In ``SAMPLED`` mode it is estimated the
way hardware would: run ``U(x')^dagger U(x)`` and count how often ``|0...0>``
is measured in ``shots`` repetitions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .featuremap import FeatureMapSpec, build, statevectors
from .simulator import derive_seed, run_circuit, sample_ground_state_prob

__all__ = [
    "KernelMode",
    "QuantumKernelConfig",
    "GramMatrix",
    "kernel_exact",
    "kernel_sampled",
    "gram",
    "regularize_cutoff",
    "write_gram_csv",
    "read_gram_csv",
]

# eigenvalues in (-_EIG_ZERO, 0) count as round-off, not as clipped mass
_EIG_ZERO = 1e-10


class KernelMode(str, Enum):
    EXACT = "EXACT"
    SAMPLED = "SAMPLED"


@dataclass(frozen=True, eq=False)
class QuantumKernelConfig:
    """Everything needed to evaluate a quantum kernel.

    ``theta`` may be ``None`` for configurations whose parameters are drawn
    later (e.g. at the start of a Bayesian-optimization run).
    """

    spec: FeatureMapSpec
    theta: np.ndarray | None = None
    mode: KernelMode = KernelMode.EXACT
    shots: int | None = None
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", KernelMode(self.mode))
        if self.theta is not None:
            theta = np.asarray(self.theta, dtype=float).reshape(-1).copy()
            theta.setflags(write=False)
            object.__setattr__(self, "theta", theta)
        if self.mode is KernelMode.SAMPLED and (self.shots is None or self.shots < 1):
            raise ValueError("SAMPLED mode requires shots >= 1")

    def with_theta(self, theta):
        return QuantumKernelConfig(self.spec, theta, self.mode, self.shots, self.master_seed)

    def with_seed(self, master_seed):
        return QuantumKernelConfig(self.spec, self.theta, self.mode, self.shots, int(master_seed))

    def to_dict(self):
        return {
            "feature_map": self.spec.to_dict(),
            "theta": None if self.theta is None else self.theta.tolist(),
            "mode": self.mode.value,
            "shots": self.shots,
            "master_seed": self.master_seed,
        }


@dataclass(eq=False)
class GramMatrix:
    entries: np.ndarray
    symmetric: bool
    regularized: bool = False
    clipped_mass: float = 0.0
    mode: KernelMode = KernelMode.EXACT
    shots: int | None = None

    @property
    def shape(self):
        return self.entries.shape

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.entries)[0])


def _require_theta(cfg):
    if cfg.theta is None:
        raise ValueError("kernel configuration has no parameters bound")
    return cfg.theta


def kernel_exact(x, x2, cfg):
    """Squared statevector overlap of two scaled points."""
    theta = _require_theta(cfg)
    psi = statevectors(cfg.spec, theta, np.vstack([np.atleast_1d(x), np.atleast_1d(x2)]))
    return float(abs(np.vdot(psi[1], psi[0])) ** 2)


def kernel_sampled(x, x2, cfg, entry_seed):
    """Shot estimate of the kernel from the composed circuit ``U(x')^dagger U(x)``."""
    if cfg.mode is not KernelMode.SAMPLED:
        raise ValueError("kernel_sampled needs a SAMPLED configuration")
    theta = _require_theta(cfg)
    circuit = build(cfg.spec, theta, x).then(build(cfg.spec, theta, x2).inverse())
    state = run_circuit(circuit)
    return sample_ground_state_prob(state, cfg.shots, derive_seed(cfg.master_seed, entry_seed))


def gram(X, X2=None, cfg=None, context=0):
    """Kernel matrix between the rows of ``X`` and ``X2``.

    Parameters
    ----------
    X : array_like, shape (n, d)
    X2 : array_like, shape (m, d), optional
        ``None`` means ``X2 = X``. Then only the upper triangle is evaluated,
        it is mirrored, and the diagonal is exactly 1.
    cfg : QuantumKernelConfig
    context : int or tuple of int
        Mixed with ``cfg.master_seed`` to seed the shot noise, so that
        different matrices built from one configuration get independent noise.

    Returns
    -------
    GramMatrix
    """
    if cfg is None:
        raise ValueError("a kernel configuration is required")
    theta = _require_theta(cfg)
    X = np.asarray(X, dtype=float)
    same = X2 is None
    if X.size == 0 or (not same and np.asarray(X2).size == 0):
        raise ValueError("Gram matrix of an empty point set")
    psi = statevectors(cfg.spec, theta, X)
    phi = psi if same else statevectors(cfg.spec, theta, np.asarray(X2, dtype=float))
    # probability of |0...0> after U(x_j)^dagger U(x_i)
    probs = np.abs(psi.conj() @ phi.T) ** 2
    np.clip(probs, 0.0, 1.0, out=probs)

    if cfg.mode is KernelMode.SAMPLED:
        ctx = (context,) if np.isscalar(context) else tuple(context)
        rng = np.random.default_rng(derive_seed(cfg.master_seed, *ctx))
        if same:
            iu = np.triu_indices(X.shape[0], k=1)
            probs[iu] = rng.binomial(cfg.shots, probs[iu]) / cfg.shots
        else:
            probs = rng.binomial(cfg.shots, probs) / cfg.shots

    if same:
        upper = np.triu(probs, k=1)
        probs = upper + upper.T
        np.fill_diagonal(probs, 1.0)
    return GramMatrix(probs, symmetric=same, mode=cfg.mode, shots=cfg.shots)


def regularize_cutoff(G):
    """Nearest positive semidefinite matrix: zero out the negative spectrum.

    Accepts a ``GramMatrix`` or a plain symmetric array and returns a new
    ``GramMatrix`` with ``regularized`` set and ``clipped_mass`` equal to the
    summed magnitude of the removed eigenvalues.
    """
    if isinstance(G, GramMatrix):
        entries, mode, shots = G.entries, G.mode, G.shots
    else:
        entries, mode, shots = np.asarray(G, dtype=float), KernelMode.EXACT, None
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {entries.shape}")
    if not np.allclose(entries, entries.T, rtol=0.0, atol=1e-12):
        raise ValueError("eigenvalue cutoff needs a symmetric matrix")
    evals, evecs = np.linalg.eigh(entries)
    clipped_mass = float(-evals[evals <= -_EIG_ZERO].sum())
    if np.all(evals >= 0.0):
        out = entries.copy()
    else:
        out = (evecs * np.maximum(evals, 0.0)) @ evecs.T
        out = 0.5 * (out + out.T)
    return GramMatrix(out, symmetric=True, regularized=True, clipped_mass=clipped_mass, mode=mode, shots=shots)


_CSV_HEADER = ["n", "m", "mode", "shots", "clipped_mass", "symmetric", "regularized"]


def write_gram_csv(G, path):
    """Write ``G`` as CSV: a metadata header row, its values, then the matrix rows."""
    n, m = G.entries.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_CSV_HEADER)
        w.writerow([n, m, KernelMode(G.mode).value, G.shots if G.shots is not None else 0,
                    repr(float(G.clipped_mass)), int(G.symmetric), int(G.regularized)])
        for row in G.entries:
            w.writerow([repr(float(v)) for v in row])


def read_gram_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != _CSV_HEADER:
        raise ValueError(f"{path}: not a Gram matrix file")
    meta = dict(zip(rows[0], rows[1]))
    n, m = int(meta["n"]), int(meta["m"])
    entries = np.array([[float(v) for v in r] for r in rows[2:]], dtype=float)
    if entries.shape != (n, m):
        raise ValueError(f"{path}: header says {n}x{m}, found {entries.shape}")
    shots = int(meta["shots"]) or None
    return GramMatrix(
        entries,
        symmetric=bool(int(meta["symmetric"])),
        regularized=bool(int(meta["regularized"])),
        clipped_mass=float(meta["clipped_mass"]),
        mode=KernelMode(meta["mode"]),
        shots=shots,
    )
