"""Multi-step PEC sampling of a memory qubit plus a re-used ancilla.

Qubit 0 holds the memory, qubit 1 the ancilla. Each step: fresh ancilla
preparation, noisy model unitary, one sampled basis operation, ancilla
readout through a sampled observable variant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .. import _kernels
from ..errors import ValidationError
from ..ptm import NoiseModel, NoisyDevice, circuit_ptm, noisy_effects, noisy_prep_vector
from .basis import BasisOperationSet, build_basis_set
from .gst import EXACT, GstDataset, basis_hats, compute_hat, inverse_noise, run_gst
from .quasiprob import QuasiprobDecomposition, decompose_quasiprob, decompose_state_measurement

IDENTITY_LABEL = "id(x)id"


@dataclass
class PecPlan:
    t: int
    unitary_noisy: np.ndarray
    unitary_exact: np.ndarray
    op_ptms: np.ndarray  # actual noisy basis operations
    prep_vecs: np.ndarray  # actual noisy preparations of the columns of T
    meas_effects: np.ndarray  # (variant, result, 4)
    q_op: QuasiprobDecomposition
    q_prep: QuasiprobDecomposition
    q_meas: QuasiprobDecomposition
    op_labels: tuple = ()

    def __post_init__(self):
        if self.t < 1:
            raise ValidationError("need at least one step")
        if len(self.q_op.coefficients) != len(self.op_ptms):
            raise ValidationError("operator decomposition does not match the basis")

    @property
    def n_uniforms(self) -> int:
        return 5 * self.t + 1

    @property
    def stage_cost(self) -> float:
        return self.q_prep.cost * self.q_op.cost * self.q_meas.cost

    @property
    def cost(self) -> float:
        return (self.q_prep.cost ** (self.t + 1) * self.q_op.cost ** self.t
                * self.q_meas.cost ** self.t)

    @property
    def keep_prob(self) -> float:
        c = self.q_meas.cost
        return (1.0 + c) / (2.0 * c)

    def with_steps(self, t: int) -> "PecPlan":
        return replace(self, t=t)

    def unmitigated(self) -> "PecPlan":
        """Same device with every decomposition replaced by the plain operation."""
        ident = self.op_labels.index(IDENTITY_LABEL) if self.op_labels else 0
        return replace(self, q_op=QuasiprobDecomposition.trivial(len(self.op_ptms), ident),
                       q_prep=QuasiprobDecomposition.trivial(4, 0),
                       q_meas=QuasiprobDecomposition.trivial(4, 3))

    def kernel_args(self) -> tuple:
        return (self.q_prep.cdf, np.ascontiguousarray(self.prep_vecs), self.q_prep.signs,
                np.ascontiguousarray(self.unitary_noisy), self.q_op.cdf,
                np.ascontiguousarray(self.op_ptms), self.q_op.signs, self.q_meas.cdf,
                np.ascontiguousarray(self.meas_effects), self.q_meas.signs, self.keep_prob)

    def decompositions_dict(self) -> dict:
        return {"t": self.t, "cost": self.cost, "stage_cost": self.stage_cost,
                "q_op": self.q_op.to_dict(), "q_prep": self.q_prep.to_dict(),
                "q_meas": self.q_meas.to_dict()}


def run_tomography(circuit, noise: NoiseModel, shots=EXACT, seed: int = 0,
                   basis: BasisOperationSet | None = None):
    """Two-qubit tomography of the noisy circuit and basis set, plus one-qubit GST."""
    if circuit.num_qubits != 2:
        raise ValidationError("the PEC plan needs a two-qubit model circuit")
    basis = basis or build_basis_set(2)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    ops = basis.noisy_ptms(noise)
    gst2 = run_gst(NoisyDevice(noise, 2), [circuit_ptm(circuit, noise)], ops, shots, rng)
    gst1 = run_gst(NoisyDevice(noise, 1), [], [], shots, rng)
    return gst2, gst1


def plan_from_tomography(circuit, noise: NoiseModel, gst2: GstDataset, gst1: GstDataset,
                         t: int = 1, basis: BasisOperationSet | None = None) -> PecPlan:
    basis = basis or build_basis_set(2)
    u_exact = circuit_ptm(circuit)
    target = inverse_noise(u_exact, compute_hat(gst2, 0))
    q_op = decompose_quasiprob(target, basis_hats(gst2), basis.labels)
    q_prep, q_meas = decompose_state_measurement(gst1)
    prep = np.array([noisy_prep_vector(k, noise) for k in range(4)])
    effects = np.array([noisy_effects(j, noise) for j in range(4)])
    return PecPlan(t, circuit_ptm(circuit, noise), u_exact, basis.noisy_ptms(noise), prep,
                   effects, q_op, q_prep, q_meas, tuple(basis.labels))


def build_pec_plan(circuit, noise: NoiseModel, t: int = 1, shots=EXACT, seed: int = 0,
                   basis: BasisOperationSet | None = None) -> PecPlan:
    """Tomography and decompositions for a two-qubit model circuit."""
    basis = basis or build_basis_set(2)
    gst2, gst1 = run_tomography(circuit, noise, shots, seed, basis)
    return plan_from_tomography(circuit, noise, gst2, gst1, t, basis)


def _stream(master_seed: int, tag: int, t: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(tag, t, block)))


def monte_carlo_run(plan: PecPlan, rng: np.random.Generator, backend: str | None = None
                    ) -> tuple[str, int]:
    """One sampled circuit: (outcome bits, first step first; sign)."""
    u = rng.random((1, plan.n_uniforms))
    kernel = _kernels.BACKENDS[backend] if backend else _kernels.run_block
    word, sign = kernel(u, plan.t, *plan.kernel_args())
    return format(int(word[0]), f"0{plan.t}b"), int(sign[0])


@dataclass
class MitigatedDistribution:
    t: int
    n_mc: int
    cost: float
    stage_cost: float
    counts_plus: np.ndarray
    counts_minus: np.ndarray
    chunk_size: int | None = None
    chunk_estimates: np.ndarray | None = None
    backend: str = ""

    @property
    def words(self) -> list[str]:
        return [format(w, f"0{self.t}b") for w in range(2 ** self.t)]

    @property
    def p_qem(self) -> np.ndarray:
        return self.cost * (self.counts_plus - self.counts_minus) / self.n_mc

    @property
    def sigma_predicted(self) -> float:
        return self.cost / np.sqrt(self.n_mc)

    def clipped(self) -> np.ndarray:
        """Presentation view: negatives set to zero, then renormalised."""
        p = np.clip(self.p_qem, 0.0, None)
        total = p.sum()
        return p / total if total > 0 else np.full(p.size, 1.0 / p.size)

    def to_dict(self) -> dict:
        out = {"t": self.t, "n_mc": self.n_mc, "cost": self.cost,
               "stage_cost": self.stage_cost, "words": self.words,
               "p_qem": self.p_qem.tolist(), "counts_plus": self.counts_plus.tolist(),
               "counts_minus": self.counts_minus.tolist(),
               "sigma_predicted": self.sigma_predicted, "chunk_size": self.chunk_size,
               "backend": self.backend}
        if self.chunk_estimates is not None:
            out["chunk_estimates"] = self.chunk_estimates.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def run_pec(plan: PecPlan, n_mc: int, master_seed: int = 0, chunk_size: int | None = None,
            backend: str | None = None, block: int = 1 << 16, tag: int = 0,
            record_sink=None) -> MitigatedDistribution:
    """Accumulate signed outcome counts over ``n_mc`` sampled circuits.

    Blocks draw from independent streams keyed by (tag, t, block index), so
    results do not depend on the backend. ``record_sink(offset, words, signs)``
    receives every block if given.
    """
    if n_mc < 1:
        raise ValidationError("n_mc must be at least 1")
    if chunk_size is not None and (chunk_size < 1 or n_mc % chunk_size):
        raise ValidationError("chunk_size must divide n_mc")
    kernel = _kernels.BACKENDS[backend] if backend else _kernels.run_block
    name = backend or _kernels.BACKEND
    n_out = 2 ** plan.t
    plus = np.zeros(n_out, dtype=np.int64)
    minus = np.zeros(n_out, dtype=np.int64)
    n_chunks = n_mc // chunk_size if chunk_size else 0
    chunk_net = np.zeros((n_chunks, n_out), dtype=np.int64) if chunk_size else None
    args = plan.kernel_args()
    done, b = 0, 0
    while done < n_mc:
        size = min(block, n_mc - done)
        u = _stream(master_seed, tag, plan.t, b).random((size, plan.n_uniforms))
        words, signs = kernel(u, plan.t, *args)
        neg = signs < 0
        plus += np.bincount(words[~neg], minlength=n_out)
        minus += np.bincount(words[neg], minlength=n_out)
        if chunk_size:
            chunk = (done + np.arange(size)) // chunk_size
            np.add.at(chunk_net, (chunk, words), signs.astype(np.int64))
        if record_sink is not None:
            record_sink(done, words, signs)
        done += size
        b += 1
    estimates = plan.cost * chunk_net / chunk_size if chunk_size else None
    return MitigatedDistribution(plan.t, n_mc, plan.cost, plan.stage_cost, plus, minus,
                                 chunk_size, estimates, name)


def _propagate(t: int, prep: np.ndarray, step: np.ndarray, effects: np.ndarray) -> np.ndarray:
    """Signed-weighted outcome distribution from linear (unnormalised) maps."""
    mems = {0: prep}
    for _ in range(t):
        nxt = {}
        for word, mem in mems.items():
            V = (step @ np.kron(mem, prep)).reshape(4, 4)
            for bit in (0, 1):
                nxt[2 * word + bit] = V @ effects[bit]
        mems = nxt
    return np.array([mems[w][0] for w in range(2 ** t)])


def exact_distribution(plan: PecPlan, which: str = "mitigated") -> np.ndarray:
    """Exact expectation of the sampled estimator, without Monte Carlo noise.

    ``which``: "ideal" (noiseless chain), "noisy" (unmitigated device),
    "mitigated" (expected value of ``P_QEM`` under ``plan``) or "occupancy"
    (fraction of sampled runs reporting each word, whatever their sign).
    """
    if which == "ideal":
        prep = np.array([1.0, 0, 0, 1.0])
        effects = np.array([[0.5, 0, 0, 0.5], [0.5, 0, 0, -0.5]])
        return _propagate(plan.t, prep, plan.unitary_exact, effects)
    if which == "noisy":
        plan = plan.unmitigated()
    elif which not in ("mitigated", "occupancy"):
        raise ValidationError(f"unknown distribution {which!r}")
    signed = which != "occupancy"

    def weights(q: QuasiprobDecomposition) -> np.ndarray:
        return q.coefficients if signed else np.abs(q.coefficients) / q.cost

    prep = weights(plan.q_prep) @ plan.prep_vecs
    step = np.einsum("i,iab->ab", weights(plan.q_op), plan.op_ptms) @ plan.unitary_noisy
    a = plan.keep_prob
    effects = np.zeros((2, 4))
    for j, qj in enumerate(plan.q_meas.coefficients):
        if qj == 0:
            continue
        w = abs(qj) if signed else abs(qj) / plan.q_meas.cost
        for result in (0, 1):
            natural = 0 if np.sign(qj) * (1 - 2 * result) > 0 else 1
            # reported flipped bits carry a negative sign
            effects[natural] += w * a * plan.meas_effects[j, result]
            effects[1 - natural] += (-w if signed else w) * (1 - a) * plan.meas_effects[j, result]
    return _propagate(plan.t, prep, step, effects)
