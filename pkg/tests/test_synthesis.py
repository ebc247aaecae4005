import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from stochpec.errors import DimensionReductionError, NotUnitaryError, ValidationError
from stochpec.inference import infer_memory_states, merge_states
from stochpec.process import perturbed_coin_conditional
from stochpec.synthesis import (ControlledU1, GateCircuit, MultiplexedRy, NotGate, SingleZYZ,
                                ancilla_marginal, apply_model_step, build_unitary,
                                circuit_depth_formula, csd_decompose, gram_schmidt_basis,
                                matrix_from_json, matrix_to_json, reconstruct, ry, rz,
                                sample_outputs, unitarity_defect, zyz_angles, zyz_matrix)

from conftest import coin_chain_word_probs


def _phase_distance(A, B):
    k = np.unravel_index(np.argmax(np.abs(B)), B.shape)
    phase = A[k] / B[k]
    return float(np.abs(A - phase / abs(phase) * B).max())


def test_coin_column(coin_model):
    col = coin_model.matrix[:, 0].real
    assert np.allclose(col, [0.4472, 0.7155, 0.0, 0.5367], atol=1e-3)


def test_coin_unitary_and_overlaps(coin_model, coin_states):
    assert unitarity_defect(coin_model.matrix) <= 1e-9
    mem = coin_model.memory_states
    assert np.abs(mem @ mem.T - coin_states.gram()).max() <= 1e-9


def test_coin_single_step_marginal(coin_model):
    joint = apply_model_step(coin_model.matrix, coin_model.memory_states[0])
    assert ancilla_marginal(joint)[1] == pytest.approx(0.8, abs=1e-12)


def test_coin_two_step_joint(coin_model):
    # memory after symbol x is the state labelled x; enumerate branches directly
    probs = np.zeros(4)
    joint = apply_model_step(coin_model.matrix, coin_model.memory_states[0]).reshape(-1, 2)
    for x1 in (0, 1):
        branch = joint[:, x1]
        p1 = float(np.vdot(branch, branch).real)
        nxt = ancilla_marginal(apply_model_step(coin_model.matrix, branch / math.sqrt(p1)))
        probs[2 * x1:2 * x1 + 2] = p1 * nxt
    assert np.allclose(probs, coin_chain_word_probs(0.2, 2), atol=1e-12)


def test_deterministic_limit():
    states, _ = merge_states(infer_memory_states(perturbed_coin_conditional(1.0, 1)), delta=1e-9)
    model = build_unitary(states)
    for k in range(2):
        marg = ancilla_marginal(apply_model_step(model.matrix, model.memory_states[k]))
        assert marg[states.labels[k][-1]] == pytest.approx(1.0)


def test_period_two_fixed_columns_are_permutation():
    states = infer_memory_states(perturbed_coin_conditional(0.0, 1))
    model = build_unitary(states)
    fixed = model.matrix[:, ::2]
    assert np.allclose(np.abs(fixed), np.round(np.abs(fixed)), atol=1e-12)
    assert np.allclose(np.abs(fixed).sum(axis=0), 1.0)


def test_noiseless_three_step_sampling(coin_model):
    rng = np.random.default_rng(17)
    shots = 100_000
    out = sample_outputs(coin_model, 3, shots, rng)
    words = out @ np.array([4, 2, 1])
    freq = np.bincount(words, minlength=8) / shots
    expected = coin_chain_word_probs(0.2, 3)
    assert np.all(np.abs(freq - expected) <= 3 * np.sqrt(expected * (1 - expected) / shots))


def test_seeded_completion_deterministic(coin_states):
    a = build_unitary(coin_states, seed=4).matrix
    b = build_unitary(coin_states, seed=4).matrix
    c = build_unitary(coin_states, seed=5).matrix
    assert np.array_equal(a, b)
    assert np.allclose(a[:, ::2], c[:, ::2])


def test_gram_schmidt_orthonormal_and_dependent():
    rng = np.random.default_rng(2)
    states = np.abs(rng.standard_normal((3, 4)))
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    basis = gram_schmidt_basis(states)
    e = basis.gamma @ states
    assert np.abs(e @ e.T - np.eye(3)).max() <= 1e-10
    with pytest.raises(DimensionReductionError):
        gram_schmidt_basis(np.vstack([states, states[:1]]))


def test_padding_to_power_of_two():
    # three memory states -> memory register padded to dimension four
    from stochpec.process import SymbolSequence, conditional_distribution
    cond = conditional_distribution(SymbolSequence(np.array([0, 0, 1] * 40)), 2)
    states, _ = merge_states(infer_memory_states(cond), delta=1e-9)
    model = build_unitary(states)
    assert len(states) == 3 and model.memory_dim == 4 and model.dim == 8
    assert unitarity_defect(model.matrix) <= 1e-9
    for k in range(3):
        row = cond.table[states.labels[k]]
        marg = ancilla_marginal(apply_model_step(model.matrix, model.memory_states[k]))
        assert np.allclose(marg, row, atol=1e-12)


def test_missing_successor_rejected(coin_states):
    from dataclasses import replace
    broken = replace(coin_states, successor={})
    with pytest.raises(ValidationError):
        build_unitary(broken)


def test_dimension_mismatch(coin_model):
    with pytest.raises(ValidationError):
        apply_model_step(coin_model.matrix, np.ones(4))


def test_identity_decomposes_to_zero_angles():
    circuit = csd_decompose(np.eye(4))
    for g in circuit.gates:
        assert all(abs(math.remainder(a, 2 * math.pi)) < 1e-12 for a in g.angles)
    assert np.abs(reconstruct(circuit) - np.eye(4)).max() <= 1e-12


@pytest.mark.parametrize("dim,tol", [(2, 1e-10), (4, 1e-10), (8, 1e-9), (16, 1e-9)])
def test_csd_roundtrip(dim, tol):
    for seed in range(5):
        U = unitary_group.rvs(dim, random_state=seed)
        assert np.abs(reconstruct(csd_decompose(U)) - U).max() <= tol


def test_csd_keeps_global_phase():
    U = 1j * unitary_group.rvs(4, random_state=9)
    assert _phase_distance(reconstruct(csd_decompose(U)), U) <= 1e-10
    assert np.abs(reconstruct(csd_decompose(U)) - U).max() <= 1e-10


def test_csd_rejects_non_unitary():
    with pytest.raises(NotUnitaryError):
        csd_decompose(np.ones((4, 4)))
    with pytest.raises(ValidationError):
        csd_decompose(np.eye(3))


def test_csd_coin_circuit_roundtrip(coin_model, coin_circuit):
    assert np.abs(reconstruct(coin_circuit) - coin_model.matrix).max() <= 1e-10
    assert coin_circuit.depth_reported == len(coin_circuit.gates)


def test_empty_circuit_is_identity():
    assert np.array_equal(reconstruct(GateCircuit(2, [])), np.eye(4))


def test_single_zyz_gate():
    g = SingleZYZ(0, 0.3, 1.1, -0.7, 2.0)
    expected = np.exp(0.3j) * rz(1.1) @ ry(-0.7) @ rz(2.0)
    assert np.allclose(reconstruct(GateCircuit(1, [g])), expected, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_zyz_angles_roundtrip(seed):
    U = unitary_group.rvs(2, random_state=seed)
    assert np.abs(zyz_matrix(*zyz_angles(U)) - U).max() <= 1e-12


@pytest.mark.parametrize("U", [np.eye(2), np.array([[0, 1], [1, 0]]), np.diag([1, 1j]),
                               np.array([[0, -1j], [1j, 0]])])
def test_zyz_gimbal_points(U):
    assert np.abs(zyz_matrix(*zyz_angles(U.astype(complex))) - U).max() <= 1e-12


def test_circuit_validation():
    with pytest.raises(ValidationError):
        GateCircuit(2, [NotGate(2)])
    with pytest.raises(ValidationError):
        GateCircuit(2, [MultiplexedRy(0, (1,), (0.1,))])


def test_circuit_json_roundtrip(coin_circuit):
    again = GateCircuit.from_json(coin_circuit.to_json())
    assert np.array_equal(reconstruct(again), reconstruct(coin_circuit))
    extra = GateCircuit(3, [ControlledU1(0.4, (0, 1), 2), NotGate(1, (0,))])
    assert np.array_equal(reconstruct(GateCircuit.from_json(extra.to_json())), reconstruct(extra))
    with pytest.raises(ValidationError):
        GateCircuit.from_records(1, [{"kind": "Bogus", "qubits": [0], "angles": []}])


def test_matrix_json_roundtrip(coin_model):
    assert np.array_equal(matrix_from_json(matrix_to_json(coin_model.matrix)), coin_model.matrix)


def test_depth_formula():
    assert circuit_depth_formula(2, 1) == 33
    assert circuit_depth_formula(2, 3) == 99
    assert circuit_depth_formula(3, 1) == 137
    assert circuit_depth_formula(1, 1) == 7
    with pytest.raises(ValidationError):
        circuit_depth_formula(0, 1)
