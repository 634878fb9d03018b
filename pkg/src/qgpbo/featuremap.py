"""Parameterized data-encoding circuits and input/label scaling.

Two circuit families are available.

``CHEBYSHEV_HWE``
    ``l`` repetitions of: trainable ``RY(theta)`` on every qubit, data rotation
    ``RY(arccos(x[j % d]))`` on qubit ``j``, then a linear CNOT chain
    ``(0->1), (1->2), ..., (q-2 -> q-1)``. A final trainable ``RY`` layer closes
    the circuit, giving ``q * (l + 1)`` parameters.

``HWE_ALT``
    Hadamard on every qubit, then ``l`` repetitions of: ``RY(theta_a * x[j % d])``
    and a trainable ``RZ(theta_b)`` on every qubit, followed by a CNOT ring.
    ``2 * q * l`` parameters.

Feature ``k`` of a ``d``-dimensional input is encoded on every qubit ``j`` with
``j % d == k``, so a point can be encoded redundantly on more qubits than it
has dimensions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError
from .simulator import Circuit, GateKind, GateOp, StateVector, apply_gate_batch

__all__ = [
    "Family",
    "FeatureMapSpec",
    "ScalingSpec",
    "build",
    "statevectors",
    "scale_inputs",
    "unscale_inputs",
    "scale_labels",
    "unscale_labels",
    "unscale_std",
]

_DOMAIN_TOL = 1e-12


class Family(str, Enum):
    CHEBYSHEV_HWE = "CHEBYSHEV_HWE"
    HWE_ALT = "HWE_ALT"


@dataclass(frozen=True)
class FeatureMapSpec:
    family: Family = Family.CHEBYSHEV_HWE
    num_qubits: int = 4
    num_layers: int = 2
    input_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.num_qubits < 1 or self.num_layers < 1 or self.input_dim < 1:
            raise ValueError(f"qubits, layers and input_dim must be positive: {self}")

    @property
    def num_params(self):
        q, l = self.num_qubits, self.num_layers
        if self.family is Family.CHEBYSHEV_HWE:
            return q * (l + 1)
        return 2 * q * l

    def feature_of(self, qubit):
        return qubit % self.input_dim

    def to_dict(self):
        return {
            "family": self.family.value,
            "num_qubits": self.num_qubits,
            "num_layers": self.num_layers,
            "input_dim": self.input_dim,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            family=Family(d["family"]),
            num_qubits=int(d["num_qubits"]),
            num_layers=int(d["num_layers"]),
            input_dim=int(d["input_dim"]),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# A template step is (kind, target, control, angle_rule) where angle_rule is
#   None                    fixed gate (H, CNOT)
#   ("theta", i)            angle = theta[i]
#   ("arccos", k)           angle = arccos(x[k])
#   ("scaled", i, k)        angle = theta[i] * x[k]
def _template(spec):
    q, d = spec.num_qubits, spec.input_dim
    steps = []
    p = 0
    if spec.family is Family.CHEBYSHEV_HWE:
        for _ in range(spec.num_layers):
            for j in range(q):
                steps.append((GateKind.RY, j, None, ("theta", p)))
                p += 1
            for j in range(q):
                steps.append((GateKind.RY, j, None, ("arccos", j % d)))
            for j in range(q - 1):
                steps.append((GateKind.CNOT, j + 1, j, None))
        for j in range(q):
            steps.append((GateKind.RY, j, None, ("theta", p)))
            p += 1
    else:
        for j in range(q):
            steps.append((GateKind.H, j, None, None))
        for _ in range(spec.num_layers):
            for j in range(q):
                steps.append((GateKind.RY, j, None, ("scaled", p, j % d)))
                p += 1
            for j in range(q):
                steps.append((GateKind.RZ, j, None, ("theta", p)))
                p += 1
            if q == 2:
                steps.append((GateKind.CNOT, 1, 0, None))
            elif q > 2:
                for j in range(q):
                    steps.append((GateKind.CNOT, (j + 1) % q, j, None))
    assert p == spec.num_params
    return steps


def _check_theta(spec, theta):
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != spec.num_params:
        raise ValueError(f"expected {spec.num_params} parameters, got {theta.size}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameters must be finite")
    return theta


def _check_points(spec, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        # 1-D input: n scalar points, or a single d-dimensional point
        X = X[:, None] if spec.input_dim == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != spec.input_dim:
        raise ValueError(f"points must have {spec.input_dim} features, got shape {X.shape}")
    if np.any(~np.isfinite(X)) or np.any(np.abs(X) > 1.0 + _DOMAIN_TOL):
        raise DomainError("feature map inputs must be scaled into [-1, 1]")
    return np.clip(X, -1.0, 1.0)


def _angles(rule, theta, X):
    tag = rule[0]
    if tag == "theta":
        return theta[rule[1]]
    if tag == "arccos":
        return np.arccos(X[:, rule[1]])
    return theta[rule[1]] * X[:, rule[2]]


def build(spec, theta, x):
    """Concrete circuit ``U(x; theta)`` for one scaled data point ``x``."""
    theta = _check_theta(spec, theta)
    X = _check_points(spec, np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1))
    ops = []
    for kind, target, control, rule in _template(spec):
        angle = 0.0 if rule is None else float(np.asarray(_angles(rule, theta, X)).reshape(-1)[0])
        ops.append(GateOp(kind, target, control, angle))
    return Circuit(spec.num_qubits, tuple(ops))


def statevectors(spec, theta, X):
    """Embedded states ``U(x; theta)|0>`` for every row of ``X``.

    Equivalent to ``run_circuit(build(spec, theta, x))`` per row, but all rows
    are propagated through the circuit together.

    Returns
    -------
    ndarray, shape (n, 2**num_qubits), complex
    """
    theta = _check_theta(spec, theta)
    X = _check_points(spec, X)
    q = spec.num_qubits
    psi = np.zeros((X.shape[0], 2**q), dtype=np.complex128)
    psi[:, 0] = 1.0
    for kind, target, control, rule in _template(spec):
        angles = None if rule is None else _angles(rule, theta, X)
        psi = apply_gate_batch(psi, kind, target, q, control, angles)
    return psi


def statevector(spec, theta, x):
    return StateVector(statevectors(spec, theta, np.atleast_1d(x).reshape(1, -1))[0])


@dataclass(frozen=True, eq=False)
class ScalingSpec:
    """Affine maps taking inputs and labels to ``[-1, 1]``.

    ``input_lo``/``input_hi`` are per-dimension bounds; the label bounds may be
    omitted when only inputs are scaled.
    """

    input_lo: np.ndarray
    input_hi: np.ndarray
    label_lo: float | None = None
    label_hi: float | None = None

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.input_lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.input_hi, dtype=float))
        if lo.shape != hi.shape or np.any(~(lo < hi)):
            raise DomainError(f"input bounds must satisfy lo < hi, got {lo} and {hi}")
        object.__setattr__(self, "input_lo", lo)
        object.__setattr__(self, "input_hi", hi)
        if (self.label_lo is None) != (self.label_hi is None):
            raise ValueError("label bounds must be given together")
        if self.label_lo is not None and not self.label_lo < self.label_hi:
            raise DomainError(f"degenerate label bounds [{self.label_lo}, {self.label_hi}]")

    @property
    def input_dim(self):
        return self.input_lo.size

    def with_labels(self, y):
        """Copy with label bounds taken from the min and max of ``y``."""
        y = np.asarray(y, dtype=float)
        return ScalingSpec(self.input_lo, self.input_hi, float(y.min()), float(y.max()))

    def to_dict(self):
        return {
            "input_lo": self.input_lo.tolist(),
            "input_hi": self.input_hi.tolist(),
            "label_lo": self.label_lo,
            "label_hi": self.label_hi,
        }


def scale_inputs(x_raw, scaling):
    x = np.asarray(x_raw, dtype=float)
    lo, hi = scaling.input_lo, scaling.input_hi
    if np.any(x < lo) or np.any(x > hi):
        raise DomainError(f"input outside bounds [{lo}, {hi}]")
    out = 2.0 * (x - lo) / (hi - lo) - 1.0
    return np.clip(out, -1.0, 1.0)


def unscale_inputs(x_scaled, scaling):
    x = np.asarray(x_scaled, dtype=float)
    return scaling.input_lo + (x + 1.0) * 0.5 * (scaling.input_hi - scaling.input_lo)


def _label_bounds(scaling):
    if scaling.label_lo is None:
        raise DomainError("scaling has no label bounds")
    return scaling.label_lo, scaling.label_hi


def scale_labels(y_raw, scaling):
    lo, hi = _label_bounds(scaling)
    return 2.0 * (np.asarray(y_raw, dtype=float) - lo) / (hi - lo) - 1.0


def unscale_labels(y_scaled, scaling):
    lo, hi = _label_bounds(scaling)
    return lo + (np.asarray(y_scaled, dtype=float) + 1.0) * 0.5 * (hi - lo)


def unscale_std(std_scaled, scaling):
    """Standard deviations scale by half the label range, with no offset."""
    lo, hi = _label_bounds(scaling)
    return np.asarray(std_scaled, dtype=float) * 0.5 * (hi - lo)
