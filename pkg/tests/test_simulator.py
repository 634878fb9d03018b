import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgpbo.benchmark import dense_state, random_circuit
from qgpbo.errors import InvalidGateError
from qgpbo.simulator import (
    Circuit,
    GateKind,
    GateOp,
    StateVector,
    apply_gate,
    derive_seed,
    inner_product,
    run_circuit,
    sample_ground_state_prob,
)

R2 = 1 / np.sqrt(2)


def state(*amps):
    return StateVector(np.array(amps, dtype=complex))


def test_hadamard_on_zero():
    out = apply_gate(StateVector.zero(1), GateOp(GateKind.H, 0))
    np.testing.assert_allclose(out.amplitudes, [R2, R2], atol=1e-15)


@given(st.integers(0, 2**16))
def test_ry_zero_is_identity(seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=4) + 1j * rng.normal(size=4)
    s = StateVector(amps / np.linalg.norm(amps))
    for q in (0, 1):
        np.testing.assert_array_equal(apply_gate(s, GateOp(GateKind.RY, q, angle=0.0)).amplitudes, s.amplitudes)


def test_cnot_makes_bell_state():
    # |00> + |10> with qubit 0 as the rightmost label means indices 0 and 1
    s = state(R2, R2, 0, 0)
    out = apply_gate(s, GateOp(GateKind.CNOT, target=1, control=0))
    np.testing.assert_allclose(out.amplitudes, [R2, 0, 0, R2], atol=1e-15)


def test_apply_gate_returns_new_state():
    s = StateVector.zero(1)
    apply_gate(s, GateOp(GateKind.H, 0))
    np.testing.assert_array_equal(s.amplitudes, [1, 0])


@pytest.mark.parametrize(
    "op", [GateOp(GateKind.H, 2), GateOp(GateKind.RX, -1, angle=0.1), GateOp(GateKind.CNOT, 0, 5)]
)
def test_gate_index_out_of_range(op):
    with pytest.raises(InvalidGateError):
        apply_gate(StateVector.zero(2), op)


@pytest.mark.parametrize("kwargs", [{"control": 0}, {}])
def test_malformed_cnot(kwargs):
    with pytest.raises(InvalidGateError):
        GateOp(GateKind.CNOT, 0, **kwargs)


def test_rotation_rejects_control():
    with pytest.raises(InvalidGateError):
        GateOp(GateKind.RY, 0, control=1)


def test_empty_circuit():
    np.testing.assert_array_equal(run_circuit(Circuit(2, ())).amplitudes, [1, 0, 0, 0])


def test_ry_pi_flips():
    out = run_circuit(Circuit(1, (GateOp(GateKind.RY, 0, angle=np.pi),)))
    np.testing.assert_allclose(np.abs(out.amplitudes), [0, 1], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 30), st.integers(0, 2**32 - 1))
def test_matches_dense_matrix_product(q, depth, seed):
    circ = random_circuit(np.random.default_rng(seed), q, depth)
    out = run_circuit(circ)
    assert np.max(np.abs(out.amplitudes - dense_state(circ))) < 1e-10
    assert abs(out.norm() - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 20), st.integers(0, 2**32 - 1))
def test_inverse_circuit_undoes(q, depth, seed):
    circ = random_circuit(np.random.default_rng(seed), q, depth)
    out = run_circuit(circ.then(circ.inverse()))
    assert abs(out.amplitudes[0]) == pytest.approx(1.0, abs=1e-10)


def test_inner_product_basics():
    rng = np.random.default_rng(3)
    a = rng.normal(size=8) + 1j * rng.normal(size=8)
    s = StateVector(a / np.linalg.norm(a))
    assert inner_product(s, s) == pytest.approx(1 + 0j, abs=1e-10)
    assert inner_product(state(1, 0), state(0, 1)) == 0


def test_inner_product_vs_extended_precision():
    rng = np.random.default_rng(11)
    a = rng.normal(size=16) + 1j * rng.normal(size=16)
    b = rng.normal(size=16) + 1j * rng.normal(size=16)
    ref = sum(complex(np.clongdouble(np.conj(u)) * np.clongdouble(v)) for u, v in zip(a, b))
    assert inner_product(StateVector(a), StateVector(b)) == pytest.approx(ref, abs=1e-12)


def test_inner_product_dimension_mismatch():
    with pytest.raises(ValueError):
        inner_product(StateVector.zero(1), StateVector.zero(2))


def test_sampling_deterministic_outcomes():
    assert sample_ground_state_prob(StateVector.zero(3), 17, seed=1) == 1.0
    assert sample_ground_state_prob(state(0, 1), 17, seed=1) == 0.0


def test_sampling_rejects_zero_shots():
    with pytest.raises(ValueError):
        sample_ground_state_prob(StateVector.zero(1), 0, seed=0)


def test_sampling_binomial_band():
    plus = state(R2, R2)
    vals = np.array([sample_ground_state_prob(plus, 10_000, seed=s) for s in range(500)])
    assert np.mean((vals >= 0.47) & (vals <= 0.53)) >= 0.99


def test_sampling_is_seeded():
    plus = state(R2, R2)
    assert sample_ground_state_prob(plus, 100, 5) == sample_ground_state_prob(plus, 100, 5)


def test_sampling_error_shrinks_with_shots():
    plus = state(0.6, 0.8)
    spreads = [np.std([sample_ground_state_prob(plus, n, s) - 0.36 for s in range(200)]) for n in (100, 10_000, 1_000_000)]
    assert spreads[0] > spreads[1] > spreads[2]


def test_derive_seed_is_stable_and_context_sensitive():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert len({derive_seed(7), derive_seed(7, 0), derive_seed(7, 1), derive_seed(8, 0)}) == 4
    assert 0 <= derive_seed(123, 4) < 2**63
