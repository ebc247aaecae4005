import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochpec import _kernels
from stochpec.errors import DegenerateTomographyError, SpanDeficiencyError, ValidationError
from stochpec.mitigation import (EXACT, GstDataset, MitigatedDistribution, PecPlan,
                                 QuasiprobDecomposition, basis_hats, build_basis_set,
                                 build_pec_plan, compute_hat, decompose_quasiprob,
                                 decompose_state_measurement, distribution_fidelity,
                                 exact_distribution, gst_error_scaling, inverse_noise,
                                 monte_carlo_run, predict_fidelity_perturbation, run_gst, run_pec,
                                 sigma_mc)
from stochpec.ptm import (H, T_MATRIX, X, NoiseModel, NoisyDevice, amplitude_damping_ptm,
                          circuit_ptm, is_trace_preserving, ptm_of_unitary)

DEPOL = NoiseModel(q_dep=0.02, q_dep2=0.02, eps_meas=0.02)


@pytest.fixture(scope="module")
def noiseless_plan(coin_circuit):
    return build_pec_plan(coin_circuit, NoiseModel(), 1)


@pytest.fixture(scope="module")
def noisy_plan(coin_circuit):
    return build_pec_plan(coin_circuit, DEPOL, 1)


# --- basis sets ------------------------------------------------------------

def test_basis_sizes_and_trace_preservation():
    one, two = build_basis_set(1), build_basis_set(2)
    assert len(one) == 13 and len(two) == 241
    assert len(set(two.labels)) == 241
    for R in list(one.ideal_ptms()) + list(two.ideal_ptms()):
        assert is_trace_preserving(R, 1e-12)
    for R in two.noisy_ptms(DEPOL):
        assert is_trace_preserving(R, 1e-12)
    with pytest.raises(ValidationError):
        build_basis_set(3)


@pytest.mark.parametrize("n,full", [(1, 13), (2, 241)])
def test_basis_sets_full_rank(n, full):
    basis = build_basis_set(n)
    for ptms in (basis.ideal_ptms(), basis.noisy_ptms(DEPOL)):
        assert np.linalg.matrix_rank(ptms.reshape(len(ptms), -1), tol=1e-9) == full


def test_single_qubit_pauli_members():
    ptms = build_basis_set(1).ideal_ptms()
    assert np.allclose(ptms[0], np.eye(4))
    assert np.allclose(ptms[1], np.diag([1, 1, -1, -1]))
    # projective preparation of |0>: every input goes to (1, 0, 0, 1)
    assert np.allclose(ptms[12] @ np.array([1, 0.3, -0.2, 0.1]), [1, 0, 0, 1])


# --- tomography ------------------------------------------------------------

def test_noiseless_gram_is_t():
    gst = run_gst(NoisyDevice(NoiseModel(), 1), [])
    assert np.allclose(gst.gram, T_MATRIX)


@pytest.mark.parametrize("U", [np.eye(2), X, H])
def test_exact_gst_identity_single(U):
    gst = run_gst(NoisyDevice(NoiseModel(), 1), [ptm_of_unitary(U)])
    assert np.abs(compute_hat(gst, 0) - ptm_of_unitary(U)).max() <= 1e-9


def test_exact_gst_identity_model_unitary(coin_circuit):
    exact = circuit_ptm(coin_circuit)
    gst = run_gst(NoisyDevice(NoiseModel(), 2), [exact])
    assert np.abs(compute_hat(gst, 0) - exact).max() <= 1e-9


def test_hat_of_gram_is_identity():
    gst = run_gst(NoisyDevice(DEPOL, 1), [])
    gst.op_matrices.append(gst.gram)
    assert np.allclose(compute_hat(gst, 0), np.eye(4))


def test_depolarized_identity_hat():
    # only the operator is noisy: device preps/readout ideal, so the frame is exact
    q = 0.05
    dev = NoisyDevice(NoiseModel(), 1)
    gst = run_gst(dev, [np.diag([1, 1 - q, 1 - q, 1 - q])])
    assert np.allclose(compute_hat(gst, 0), np.diag([1, 1 - q, 1 - q, 1 - q]))
    shot = run_gst(dev, [np.diag([1, 1 - q, 1 - q, 1 - q])], shots=8192,
                   rng=np.random.default_rng(1))
    assert np.abs(compute_hat(shot, 0) - np.diag([1, 1 - q, 1 - q, 1 - q])).max() < 0.2


def test_shot_gram_close_to_exact():
    dev = NoisyDevice(DEPOL, 1)
    exact = run_gst(dev, []).gram
    shot = run_gst(dev, [], shots=8192, rng=np.random.default_rng(5)).gram
    assert np.abs(shot - exact).max() <= 5 / math.sqrt(8192)
    assert np.abs(shot).max() <= 1.0


def test_gst_validation():
    dev = NoisyDevice(NoiseModel(), 1)
    with pytest.raises(ValidationError):
        run_gst(dev, [np.eye(16)])
    with pytest.raises(ValidationError):
        run_gst(dev, [], shots=0)
    with pytest.raises(DegenerateTomographyError):
        run_gst(NoisyDevice(NoiseModel(q_dep=1.0), 1), [])


def test_gst_json_roundtrip():
    gst = run_gst(NoisyDevice(DEPOL, 1), [ptm_of_unitary(X)], build_basis_set(1).ideal_ptms())
    again = GstDataset.from_dict(__import__("json").loads(gst.to_json()))
    assert np.array_equal(again.gram, gst.gram)
    assert np.array_equal(basis_hats(again), basis_hats(gst))


def test_inverse_noise_examples():
    assert np.allclose(inverse_noise(ptm_of_unitary(X), ptm_of_unitary(X)), np.eye(4))
    q = 0.02
    inv = inverse_noise(np.eye(4), np.diag([1, 1 - q, 1 - q, 1 - q]))
    assert np.allclose(inv, np.diag([1, 1 / 0.98, 1 / 0.98, 1 / 0.98]))
    g = 0.05
    expected = np.diag([1, 1 / math.sqrt(1 - g), 1 / math.sqrt(1 - g), 1 / (1 - g)])
    expected[3, 0] = -g / (1 - g)
    assert np.allclose(inverse_noise(np.eye(4), amplitude_damping_ptm(g)), expected)
    with pytest.warns(RuntimeWarning):
        inverse_noise(np.eye(4), np.diag([1, 0.3, 0.3, 0.3]))
    with pytest.raises(DegenerateTomographyError):
        inverse_noise(np.eye(4), np.diag([1, 0, 1, 1]))


# --- quasiprobabilities ----------------------------------------------------

def test_inverse_depolarizing_decomposition():
    target = np.diag([1, 1 / 0.98, 1 / 0.98, 1 / 0.98])
    paulis = build_basis_set(1).ideal_ptms()[:4]
    dec = decompose_quasiprob(target, paulis)
    expected = [(1 + 3 / 0.98) / 4] + [(1 - 1 / 0.98) / 4] * 3
    assert np.allclose(dec.coefficients, expected, atol=1e-12)
    assert dec.cost == pytest.approx((3 - 0.98) / (2 * 0.98), abs=1e-12)
    assert dec.cost == pytest.approx(1.0306, abs=1e-4)
    full = decompose_quasiprob(target, build_basis_set(1).ideal_ptms())
    assert full.cost == pytest.approx(dec.cost, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2])
def test_noiseless_identity_costs_one(n):
    basis = build_basis_set(n)
    dec = decompose_quasiprob(np.eye(4 ** n), basis.ideal_ptms(), basis.labels)
    assert dec.cost == pytest.approx(1.0, abs=1e-6)
    assert dec.coefficients[0] == pytest.approx(1.0, abs=1e-6)
    assert dec.residual <= 1e-8


def test_span_deficiency_names_entry():
    paulis = build_basis_set(1).ideal_ptms()[:4]
    target = np.eye(4)
    target[1, 2] = 0.5
    with pytest.raises(SpanDeficiencyError, match=r"\(1, 2\)"):
        decompose_quasiprob(target, paulis)
    with pytest.raises(ValidationError):
        decompose_quasiprob(np.eye(2), paulis)


def test_decomposition_helpers():
    dec = QuasiprobDecomposition(np.array([1.2, -0.1, 0.0, -0.1]))
    assert dec.cost == pytest.approx(1.4)
    assert dec.signs.tolist() == [1, -1, 1, -1]
    assert dec.cdf[-1] == 1.0 and np.all(np.diff(dec.cdf) >= 0)
    again = QuasiprobDecomposition.from_dict(__import__("json").loads(dec.to_json()))
    assert np.array_equal(again.coefficients, dec.coefficients)


def test_state_measurement_noiseless():
    q_rho, q_meas = decompose_state_measurement(run_gst(NoisyDevice(NoiseModel(), 1), []))
    assert np.allclose(q_rho.coefficients, [1, 0, 0, 0]) and q_rho.cost == 1
    assert np.allclose(q_meas.coefficients, [0, 0, 0, 1]) and q_meas.cost == 1


def test_state_measurement_with_prep_flip():
    gst = run_gst(NoisyDevice(NoiseModel(eps_prep=0.02), 1), [])
    q_rho, q_meas = decompose_state_measurement(gst)
    assert q_rho.residual <= 1e-8 and q_meas.residual <= 1e-8
    # the fixed-T frame moves the preparation error into the readout weights
    assert q_rho.cost == pytest.approx(1.0, abs=1e-12)
    assert q_meas.cost == pytest.approx(1 / 0.96, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 0.1), st.floats(0, 0.1), st.floats(0, 0.1), st.floats(0, 0.1))
def test_cost_at_least_one(q_dep, gamma, q_z, eps):
    noise = NoiseModel(q_dep=q_dep, gamma_ad=gamma, q_z=q_z, eps_meas=eps)
    basis = build_basis_set(1)
    gst = run_gst(NoisyDevice(noise, 1), [noise.gate_noise(1) @ ptm_of_unitary(X)],
                  basis.noisy_ptms(noise))
    dec = decompose_quasiprob(inverse_noise(ptm_of_unitary(X), compute_hat(gst, 0)),
                              basis_hats(gst))
    assert dec.cost >= 1 - 1e-9
    assert dec.residual <= 1e-8
    if noise.is_noiseless:
        assert dec.cost == pytest.approx(1.0, abs=1e-6)


def test_cost_above_one_under_noise():
    noise = NoiseModel(q_dep=0.01)
    basis = build_basis_set(1)
    gst = run_gst(NoisyDevice(noise, 1), [noise.gate_noise(1) @ ptm_of_unitary(X)],
                  basis.noisy_ptms(noise))
    cost = decompose_quasiprob(inverse_noise(ptm_of_unitary(X), compute_hat(gst, 0)),
                               basis_hats(gst)).cost
    assert cost > 1 + 1e-6


# --- Monte Carlo -----------------------------------------------------------

def test_noiseless_plan_trivial(noiseless_plan):
    assert noiseless_plan.cost == pytest.approx(1.0, abs=1e-6)
    rng = np.random.default_rng(0)
    signs = [monte_carlo_run(noiseless_plan, rng)[1] for _ in range(200)]
    assert set(signs) == {1}


def test_noiseless_single_step_frequency(noiseless_plan):
    n = 100_000
    res = run_pec(noiseless_plan, n, master_seed=3)
    assert res.counts_minus.sum() == 0
    assert abs(res.p_qem[1] - 0.8) <= 3 / math.sqrt(n)


def test_unmitigated_trivial_decompositions(noisy_plan):
    plain = noisy_plan.unmitigated()
    assert plain.cost == 1.0
    res = run_pec(plain, 20_000, master_seed=1)
    assert res.counts_minus.sum() == 0


def test_cost_is_product_of_stage_costs(noisy_plan):
    for t in (1, 2, 3):
        plan = noisy_plan.with_steps(t)
        expected = (plan.q_prep.cost ** (t + 1) * plan.q_op.cost ** t * plan.q_meas.cost ** t)
        assert plan.cost == expected
        assert run_pec(plan, 100).cost == expected


def test_exact_oracles(noisy_plan):
    for t in (1, 2, 3):
        plan = noisy_plan.with_steps(t)
        ideal = exact_distribution(plan, "ideal")
        assert np.abs(exact_distribution(plan, "mitigated") - ideal).max() <= 1e-12
        assert exact_distribution(plan, "occupancy").sum() == pytest.approx(1.0)
        assert exact_distribution(plan, "noisy").sum() == pytest.approx(1.0)
    from conftest import coin_chain_word_probs
    assert np.allclose(exact_distribution(noisy_plan.with_steps(3), "ideal"),
                       coin_chain_word_probs(0.2, 3))


def test_exact_oracle_rejects_unknown(noisy_plan):
    with pytest.raises(ValidationError):
        exact_distribution(noisy_plan, "other")


def test_unbiased_over_independent_estimates(noisy_plan):
    n, reps = 20_000, 50
    est = np.array([run_pec(noisy_plan, n, master_seed=1000 + r).p_qem for r in range(reps)])
    sigma = noisy_plan.cost / math.sqrt(n)
    ideal = exact_distribution(noisy_plan, "ideal")
    assert np.all(np.abs(est.mean(axis=0) - ideal) <= 4 * sigma / math.sqrt(reps))


def test_occupancy_oracle_matches_sampling(noisy_plan):
    n = 200_000
    res = run_pec(noisy_plan, n, master_seed=9)
    occ = exact_distribution(noisy_plan, "occupancy")
    freq = (res.counts_plus + res.counts_minus) / n
    assert np.all(np.abs(freq - occ) <= 4 * np.sqrt(occ * (1 - occ) / n))


def test_sum_of_estimates_near_one(noisy_plan):
    res = run_pec(noisy_plan.with_steps(2), 100_000, master_seed=2)
    assert abs(res.p_qem.sum() - 1) <= 3 * res.sigma_predicted * math.sqrt(4)


@pytest.mark.parametrize("q", [0.01, 0.02, 0.05])
def test_mitigated_beats_unmitigated(coin_circuit, q):
    plan = build_pec_plan(coin_circuit, NoiseModel(q_dep=q, q_dep2=q, eps_meas=q), 1)
    ideal = exact_distribution(plan, "ideal")[1]
    noisy_bias = abs(exact_distribution(plan, "noisy")[1] - ideal)
    est = [run_pec(plan, 10 ** 6, master_seed=50 + r).p_qem[1] for r in range(10)]
    assert abs(np.mean(est) - ideal) < noisy_bias
    assert sum(abs(e - ideal) < noisy_bias for e in est) >= 6


def test_chunking(noisy_plan):
    res = run_pec(noisy_plan, 10_000, master_seed=4, chunk_size=1000)
    assert res.chunk_estimates.shape == (10, 2)
    assert np.allclose(res.chunk_estimates.mean(axis=0), res.p_qem)
    with pytest.raises(ValidationError):
        run_pec(noisy_plan, 10_000, chunk_size=3000)
    with pytest.raises(ValidationError):
        run_pec(noisy_plan, 0)


def test_block_size_does_not_change_stream_layout(noisy_plan):
    a = run_pec(noisy_plan, 5000, master_seed=6)
    b = run_pec(noisy_plan, 5000, master_seed=6)
    assert np.array_equal(a.counts_plus, b.counts_plus)
    assert np.array_equal(a.counts_minus, b.counts_minus)


@pytest.mark.skipif("cython" not in _kernels.BACKENDS, reason="compiled kernel not built")
@pytest.mark.parametrize("t", [1, 2, 3])
def test_backends_agree(noisy_plan, t):
    plan = noisy_plan.with_steps(t)
    a = run_pec(plan, 30_000, master_seed=8, backend="python", chunk_size=1000)
    b = run_pec(plan, 30_000, master_seed=8, backend="cython", chunk_size=1000)
    assert np.array_equal(a.counts_plus, b.counts_plus)
    assert np.array_equal(a.counts_minus, b.counts_minus)
    assert np.array_equal(a.chunk_estimates, b.chunk_estimates)


def test_record_sink(noisy_plan):
    seen = []
    res = run_pec(noisy_plan, 3000, block=1024,
                  record_sink=lambda off, w, s: seen.append((off, len(w), s.sum())))
    assert [o for o, _, _ in seen] == [0, 1024, 2048]
    assert sum(n for _, n, _ in seen) == 3000
    net = (res.counts_plus - res.counts_minus).sum()
    assert sum(s for _, _, s in seen) == net


def test_clipped_view(noisy_plan):
    res = MitigatedDistribution(1, 10, 2.0, 2.0, np.array([1, 9]), np.array([2, 0]))
    assert np.allclose(res.p_qem, [-0.2, 1.8])
    assert np.allclose(res.clipped(), [0, 1])
    assert "p_qem" in res.to_json()


def test_plan_validation(noisy_plan):
    from dataclasses import replace
    with pytest.raises(ValidationError):
        replace(noisy_plan, t=0)
    with pytest.raises(ValidationError):
        replace(noisy_plan, q_op=QuasiprobDecomposition.trivial(3))


def test_shot_tomography_plan(coin_circuit):
    plan = build_pec_plan(coin_circuit, DEPOL, 1, shots=8192, seed=2)
    assert plan.q_op.residual <= 1e-8
    # finite-shot frames are only approximately consistent
    assert np.abs(exact_distribution(plan, "mitigated") - [0.2, 0.8]).max() < 0.1


# --- analysis --------------------------------------------------------------

def test_sigma_mc_values():
    assert sigma_mc(20, 1e7, 1) == pytest.approx(0.0063, abs=5e-5)
    assert sigma_mc(20, 1e7, 2) == pytest.approx(0.1265, abs=5e-5)
    assert sigma_mc(20, 1e7, 3) == pytest.approx(2.5298, abs=5e-5)
    with pytest.raises(ValidationError):
        sigma_mc(0, 10)


def test_fidelity_values():
    assert distribution_fidelity([0.3, 0.7], [0.3, 0.7]) == pytest.approx(1.0)
    assert distribution_fidelity([1, 0], [0, 1]) == 0.0
    assert distribution_fidelity([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.8944, abs=1e-4)
    assert distribution_fidelity({"0": 1.0}, {"0": 0.5, "1": 0.5}) == pytest.approx(math.sqrt(.5))
    with pytest.raises(ValidationError):
        distribution_fidelity([0.5, 0.6], [0.5, 0.5])


def test_fidelity_prediction_values():
    assert predict_fidelity_perturbation(1, 1, 1e6, [0.5, 0.5]) == pytest.approx(5e-7)
    assert predict_fidelity_perturbation(1, 3, 1e6, [0.5, 0.5]) == pytest.approx(5e-7)
    assert predict_fidelity_perturbation(20, 1, 1e7, [0.5, 0.5]) == pytest.approx(2e-5)
    with pytest.raises(ValidationError):
        predict_fidelity_perturbation(1, 1, 1e6, [1.0, 0.0])


def test_gst_scaling_exact_and_drift():
    scaling = gst_error_scaling(NoiseModel(q_dep=0.02), [EXACT, 100, 1000, 10_000],
                                repetitions=20, seed=1)
    assert scaling.mean_errors[0] <= 1e-9
    assert scaling.exact_cost == pytest.approx(1.0718, abs=1e-3)
    drift = [abs(c - scaling.exact_cost) for c in scaling.costs[1:]]
    assert drift[-1] < drift[0]
    with pytest.raises(ValidationError):
        gst_error_scaling(NoiseModel(q_dep=0.02), [100, 500])
