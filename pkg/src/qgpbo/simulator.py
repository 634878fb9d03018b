"""Dense statevector simulation for small parameterized circuits.

Basis states are indexed little-endian: qubit 0 is the least significant bit
of the amplitude index. All functions are pure; a ``StateVector`` is never
mutated in place.

Besides the single-state API (``apply_gate``, ``run_circuit``) the module
exposes ``apply_gate_batch``, which applies one gate type to a stack of states
with a separate rotation angle per state. Feature maps use it to embed many
data points at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidGateError

__all__ = [
    "GateKind",
    "GateOp",
    "Circuit",
    "StateVector",
    "apply_gate",
    "apply_gate_batch",
    "run_circuit",
    "inner_product",
    "sample_ground_state_prob",
    "gate_matrix",
    "derive_seed",
]


class GateKind(str, Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    H = "H"
    CNOT = "CNOT"

    @property
    def is_rotation(self):
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ)


@dataclass(frozen=True)
class GateOp:
    """One gate: rotation angle in radians for RX/RY/RZ, control for CNOT."""

    kind: GateKind
    target: int
    control: int | None = None
    angle: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        if self.kind is GateKind.CNOT:
            if self.control is None:
                raise InvalidGateError("CNOT requires a control qubit")
            if self.control == self.target:
                raise InvalidGateError(f"CNOT control equals target ({self.target})")
        elif self.control is not None:
            raise InvalidGateError(f"{self.kind.value} does not take a control qubit")

    def validate(self, num_qubits):
        for name, idx in (("target", self.target), ("control", self.control)):
            if idx is None:
                continue
            if not 0 <= idx < num_qubits:
                raise InvalidGateError(
                    f"{self.kind.value} {name} index {idx} out of range for {num_qubits} qubits"
                )

    def inverse(self):
        if self.kind.is_rotation:
            return GateOp(self.kind, self.target, angle=-self.angle)
        return self


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    ops: tuple[GateOp, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.num_qubits < 1:
            raise InvalidGateError("a circuit needs at least one qubit")
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            op.validate(self.num_qubits)

    def inverse(self):
        """Adjoint circuit: reversed op list with negated angles."""
        return Circuit(self.num_qubits, tuple(op.inverse() for op in reversed(self.ops)))

    def then(self, other):
        """Circuit applying ``self`` first and ``other`` afterwards."""
        if other.num_qubits != self.num_qubits:
            raise ValueError("cannot compose circuits of different width")
        return Circuit(self.num_qubits, self.ops + other.ops)

    def count(self, kind):
        kind = GateKind(kind)
        return sum(op.kind is kind for op in self.ops)


class StateVector:
    """Amplitudes of a ``num_qubits`` register, length ``2**num_qubits``."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes):
        amps = np.asarray(amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size < 2 or amps.size & (amps.size - 1):
            raise ValueError(f"amplitude length must be a power of two >= 2, got {amps.shape}")
        self.amplitudes = amps

    @classmethod
    def zero(cls, num_qubits):
        amps = np.zeros(2**num_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps)

    @property
    def num_qubits(self):
        return self.amplitudes.size.bit_length() - 1

    @property
    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def norm(self):
        return float(np.sqrt(np.sum(self.probabilities)))

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"


_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0)


def _rotation_matrices(kind, angles):
    """Stack of 2x2 rotation matrices, shape (len(angles), 2, 2)."""
    half = 0.5 * np.asarray(angles, dtype=float)
    c, s = np.cos(half), np.sin(half)
    m = np.zeros(half.shape + (2, 2), dtype=np.complex128)
    if kind is GateKind.RY:
        m[..., 0, 0], m[..., 0, 1] = c, -s
        m[..., 1, 0], m[..., 1, 1] = s, c
    elif kind is GateKind.RX:
        m[..., 0, 0], m[..., 0, 1] = c, -1j * s
        m[..., 1, 0], m[..., 1, 1] = -1j * s, c
    elif kind is GateKind.RZ:
        m[..., 0, 0] = np.exp(-1j * half)
        m[..., 1, 1] = np.exp(1j * half)
    else:
        raise InvalidGateError(f"{kind} is not a rotation")
    return m


def _cnot_permutation(num_qubits, control, target):
    idx = np.arange(2**num_qubits)
    return idx ^ (((idx >> control) & 1) << target)


def apply_gate_batch(states, kind, target, num_qubits, control=None, angles=None):
    """Apply one gate to every row of ``states``.

    Parameters
    ----------
    states : ndarray, shape (B, 2**num_qubits)
    kind : GateKind or str
    target, control : int
    angles : float or ndarray of shape (B,), optional
        Rotation angles; a scalar is shared by all rows.

    Returns
    -------
    ndarray, shape (B, 2**num_qubits)
    """
    kind = GateKind(kind)
    GateOp(kind, target, control).validate(num_qubits)
    states = np.asarray(states, dtype=np.complex128)
    batch = states.shape[0]
    if kind is GateKind.CNOT:
        return states[:, _cnot_permutation(num_qubits, control, target)]

    # view as (B, high bits, target bit, low bits)
    psi = states.reshape(batch, 2 ** (num_qubits - 1 - target), 2, 2**target)
    a0, a1 = psi[:, :, 0, :], psi[:, :, 1, :]
    if kind is GateKind.H:
        m = np.broadcast_to(_H, (batch, 2, 2))
    else:
        ang = np.broadcast_to(np.asarray(angles if angles is not None else 0.0, dtype=float), (batch,))
        m = _rotation_matrices(kind, ang)
    m = m[:, :, :, None, None]
    out = np.empty_like(psi)
    out[:, :, 0, :] = m[:, 0, 0] * a0 + m[:, 0, 1] * a1
    out[:, :, 1, :] = m[:, 1, 0] * a0 + m[:, 1, 1] * a1
    return out.reshape(batch, -1)


def apply_gate(state, op):
    """Return ``state`` transformed by the unitary of ``op``."""
    op.validate(state.num_qubits)
    out = apply_gate_batch(
        state.amplitudes[None, :], op.kind, op.target, state.num_qubits, op.control, op.angle
    )
    return StateVector(out[0])


def run_circuit(circuit):
    """Apply ``circuit`` to ``|0...0>``."""
    amps = StateVector.zero(circuit.num_qubits).amplitudes[None, :]
    for op in circuit.ops:
        amps = apply_gate_batch(amps, op.kind, op.target, circuit.num_qubits, op.control, op.angle)
    return StateVector(amps[0])


def inner_product(a, b):
    """``<a|b>``, conjugate-linear in ``a``."""
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"qubit count mismatch: {a.num_qubits} vs {b.num_qubits}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def sample_ground_state_prob(state, shots, seed):
    """Fraction of ``shots`` computational-basis measurements that return ``|0...0>``.

    Outcomes are drawn from ``|amplitudes|**2`` with a generator seeded by
    ``seed``; the same seed always gives the same estimate.
    """
    if int(shots) < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    probs = state.probabilities
    probs = probs / probs.sum()
    counts = np.random.default_rng(seed).multinomial(int(shots), probs)
    return counts[0] / int(shots)


def gate_matrix(op, num_qubits):
    """Dense ``2**q x 2**q`` unitary of ``op`` built from Kronecker products.

    Independent of the strided update in ``apply_gate_batch``; used as a
    reference in tests and in the benchmark suite.
    """
    op.validate(num_qubits)
    eye = np.eye(2, dtype=np.complex128)
    if op.kind is GateKind.CNOT:
        p0 = np.diag([1.0, 0.0]).astype(np.complex128)
        p1 = np.diag([0.0, 1.0]).astype(np.complex128)
        x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
        terms = []
        for proj, tgt in ((p0, eye), (p1, x)):
            factors = [eye] * num_qubits
            factors[op.control] = proj
            factors[op.target] = tgt
            terms.append(factors)
    else:
        single = _H if op.kind is GateKind.H else _rotation_matrices(op.kind, op.angle)
        factors = [eye] * num_qubits
        factors[op.target] = single
        terms = [factors]
    total = np.zeros((2**num_qubits,) * 2, dtype=np.complex128)
    for factors in terms:
        mat = np.ones((1, 1), dtype=np.complex128)
        # most significant qubit first in the Kronecker product
        for f in reversed(factors):
            mat = np.kron(mat, f)
        total += mat
    return total


def derive_seed(master_seed, *context):
    """Mix a master seed with integer call context into a 63-bit seed.

    Uses numpy's ``SeedSequence`` hashing, so distinct contexts give
    statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(c) for c in context))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
