"""Pauli transfer matrices, a parametric noise model and noisy-device evaluation.

Conventions: Paulis ordered (I, X, Y, Z) per qubit, qubit 0 most significant.
State components are ``tr(sigma rho)``, measurement components
``tr(sigma M) / 2^n`` and channel entries ``tr(sigma O(tau)) / 2^n``, so
``<<M|rho>> = tr(M rho)``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache, reduce
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import UnphysicalStateError, ValidationError

PROB_TOL = 1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.diag([1.0, 1j])
SDG = S.conj().T
PAULIS = (I2, X, Y, Z)

# columns are the PTM vectors of |0>, |1>, |+>, |y+>
T_MATRIX = np.array([[1, 1, 1, 1],
                     [0, 0, 1, 0],
                     [0, 0, 0, 1],
                     [1, -1, 0, 0]], dtype=float)
PREP_LABELS = ("0", "1", "+", "y+")


def kron_all(mats) -> np.ndarray:
    return reduce(np.kron, mats)


@lru_cache(maxsize=None)
def pauli_basis(n: int) -> np.ndarray:
    """Stack of the ``4^n`` n-qubit Pauli matrices in lexicographic order."""
    if n == 0:
        return np.ones((1, 1, 1), dtype=complex)
    mats = [kron_all([PAULIS[i] for i in idx]) for idx in np.ndindex(*([4] * n))]
    return np.array(mats)


def n_qubits_of(dim: int, base: int = 2) -> int:
    n = int(round(math.log(dim, base))) if dim > 1 else 0
    if base ** n != dim:
        raise ValidationError(f"dimension {dim} is not a power of {base}")
    return n


def t_matrix(n: int) -> np.ndarray:
    return kron_all([T_MATRIX] * n) if n else np.ones((1, 1))


def ptm_of_kraus(kraus: Sequence[np.ndarray], tol: float = 1e-9) -> np.ndarray:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    d = kraus[0].shape[1]
    completeness = sum(k.conj().T @ k for k in kraus)
    if np.abs(completeness - np.eye(d)).max() > tol:
        raise ValidationError("Kraus operators do not sum to the identity")
    n = n_qubits_of(d)
    P = pauli_basis(n)
    R = np.zeros((d * d, d * d))
    for k in kraus:
        images = np.einsum("ab,tbc,dc->tad", k, P, k.conj())
        R += np.einsum("sab,tba->st", P, images).real
    return R / d


def ptm_of_unitary(U: np.ndarray) -> np.ndarray:
    return ptm_of_kraus([U], tol=1e-8)


def state_ptm(rho: np.ndarray) -> np.ndarray:
    n = n_qubits_of(rho.shape[0])
    return np.einsum("sab,ba->s", pauli_basis(n), rho).real


def measurement_ptm(M: np.ndarray) -> np.ndarray:
    return state_ptm(M) / M.shape[0]


def prep_state_ptm(labels) -> np.ndarray:
    """Product preparation, e.g. ``["0", "+"]``; each factor is a column of T."""
    if isinstance(labels, str):
        labels = [labels]
    vecs = []
    for lab in labels:
        if lab not in PREP_LABELS:
            raise ValidationError(f"unknown preparation label {lab!r}")
        vecs.append(T_MATRIX[:, PREP_LABELS.index(lab)])
    return kron_all(vecs)


def depolarizing_ptm(q: float, n: int = 1) -> np.ndarray:
    d = np.full(4 ** n, 1.0 - q)
    d[0] = 1.0
    return np.diag(d)


def amplitude_damping_ptm(gamma: float) -> np.ndarray:
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]])
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]])
    return ptm_of_kraus([k0, k1])


def dephasing_ptm(q: float) -> np.ndarray:
    return np.diag([1.0, 1 - 2 * q, 1 - 2 * q, 1.0])


def reset_ptm() -> np.ndarray:
    """Ideal reset to ``|0>``."""
    return ptm_of_kraus([np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]])])


def bit_flip_ptm(eps: float) -> np.ndarray:
    return np.diag([1.0, 1.0, 1 - 2 * eps, 1 - 2 * eps])


def embed_ptm(local: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """PTM of a channel acting on ``qubits`` (in that order) of an n-qubit register."""
    qubits = list(qubits)
    k = len(qubits)
    if k == n and qubits == list(range(n)):
        return local
    others = [q for q in range(n) if q not in qubits]
    full = np.kron(local, np.eye(4 ** (n - k))).reshape([4] * (2 * n))
    order = qubits + others
    perm = [order.index(q) for q in range(n)] + [n + order.index(q) for q in range(n)]
    return full.transpose(perm).reshape(4 ** n, 4 ** n)


def is_trace_preserving(R: np.ndarray, tol: float = 1e-9) -> bool:
    first = np.zeros(R.shape[1])
    first[0] = 1.0
    return bool(np.abs(R[0] - first).max() <= tol)


@dataclass(frozen=True)
class NoiseModel:
    """Markovian noise applied after every ideal gate, preparation and readout."""

    q_dep: float = 0.0
    q_dep2: float = 0.0
    gamma_ad: float = 0.0
    q_z: float = 0.0
    eps_meas: float = 0.0
    eps_prep: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"noise.{f.name}={v} outside [0, 1]")

    @property
    def is_noiseless(self) -> bool:
        return all(getattr(self, f.name) == 0.0 for f in fields(self))

    @classmethod
    def from_mapping(cls, mapping) -> "NoiseModel":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in mapping.items():
            name = key[len("noise."):] if key.startswith("noise.") else key
            if name not in known:
                raise ValidationError(f"unknown noise key {key!r}")
            kwargs[name] = float(value)
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, float]:
        return {f"noise.{k}": v for k, v in asdict(self).items()}

    @classmethod
    def from_file(cls, path) -> "NoiseModel":
        """Reads ``noise.key = value`` lines, or a ``[noise]`` INI section."""
        text = Path(path).read_text()
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
            if parser.has_section("noise"):
                return cls.from_mapping(dict(parser["noise"]))
        except configparser.MissingSectionHeaderError:
            pass
        parser = configparser.ConfigParser()
        parser.read_string("[root]\n" + text)
        return cls.from_mapping(dict(parser["root"]))

    @lru_cache(maxsize=None)
    def single_qubit_noise(self) -> np.ndarray:
        return (dephasing_ptm(self.q_z) @ amplitude_damping_ptm(self.gamma_ad)
                @ depolarizing_ptm(self.q_dep))

    def gate_noise(self, k: int) -> np.ndarray:
        """Noise after a gate touching ``k`` qubits (local PTM on those qubits)."""
        single = self.single_qubit_noise()
        if k == 1:
            return single
        return kron_all([single] * k) @ depolarizing_ptm(self.q_dep2, k)


def noisy_local_ptm(U: np.ndarray, noise: NoiseModel | None) -> np.ndarray:
    R = ptm_of_unitary(U)
    if noise is None:
        return R
    return noise.gate_noise(n_qubits_of(U.shape[0])) @ R


def gate_ptm(gate, n: int, noise: NoiseModel | None = None) -> np.ndarray:
    """Full-register PTM of one synthesis gate, optionally followed by its noise."""
    from .synthesis import gate_matrix, gate_qubits
    R = ptm_of_unitary(gate_matrix(gate, n))
    if noise is None:
        return R
    qubits = gate_qubits(gate)
    return embed_ptm(noise.gate_noise(len(qubits)), qubits, n) @ R


def apply_noisy_gate(state: np.ndarray, gate, noise: NoiseModel, n: int | None = None
                     ) -> np.ndarray:
    if n is None:
        n = n_qubits_of(state.size, 4)
    if state.size != 4 ** n:
        raise ValidationError("state dimension does not match the register")
    return gate_ptm(gate, n, noise) @ state


def circuit_ptm(circuit, noise: NoiseModel | None = None) -> np.ndarray:
    n = circuit.num_qubits
    R = np.eye(4 ** n)
    for g in circuit.gates:
        R = gate_ptm(g, n, noise) @ R
    return R


def _projector_row(basis: str, bit: int) -> np.ndarray:
    row = np.zeros(4)
    row[0] = 0.5
    row["IXYZ".index(basis)] = 0.5 * (1 - 2 * bit)
    return row


def measure_distribution(state: np.ndarray, noise: NoiseModel | None = None,
                         qubits: Sequence[int] | None = None,
                         bases: str | None = None) -> np.ndarray:
    """Outcome distribution of measuring ``qubits`` (default all) with readout flips.

    Outcomes are indexed with the first listed qubit as the most significant bit.
    """
    n = n_qubits_of(state.size, 4)
    qubits = list(range(n)) if qubits is None else list(qubits)
    bases = "Z" * len(qubits) if bases is None else bases
    if len(bases) != len(qubits):
        raise ValidationError("one basis letter per measured qubit")
    k = len(qubits)
    probs = np.empty(2 ** k)
    trace_row = np.array([1.0, 0, 0, 0])
    for out in range(2 ** k):
        rows = [trace_row] * n
        for pos, q in enumerate(qubits):
            rows[q] = _projector_row(bases[pos], (out >> (k - 1 - pos)) & 1)
        probs[out] = kron_all(rows) @ state
    eps = 0.0 if noise is None else noise.eps_meas
    if eps:
        flip = np.array([[1 - eps, eps], [eps, 1 - eps]])
        P = probs.reshape([2] * k)
        for axis in range(k):
            P = np.moveaxis(np.tensordot(flip, P, axes=([1], [axis])), 0, axis)
        probs = P.reshape(-1)
    return check_distribution(probs)


def check_distribution(probs: np.ndarray, tol: float = PROB_TOL) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.min() < -tol or probs.max() > 1 + tol or abs(probs.sum() - 1.0) > tol:
        raise UnphysicalStateError(
            f"outcome probabilities {probs} violate [0, 1] or normalisation")
    probs = np.clip(probs, 0.0, 1.0)
    return probs / probs.sum()


def sample_outcome(probs: np.ndarray, rng: np.random.Generator) -> int:
    probs = check_distribution(probs)
    idx = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    return min(idx, probs.size - 1)


# --- noisy single-qubit preparations and readouts --------------------------

# gates applied after a reset to |0> to reach each column of T
_PREP_GATES = {0: (), 1: (X,), 2: (H,), 3: (H, S)}
# rotations before a Z readout for the observables I, X, Y, Z
_MEAS_GATES = {0: (), 1: (H,), 2: (SDG, H), 3: ()}


def noisy_sequence_ptm(gates, noise: NoiseModel | None) -> np.ndarray:
    R = np.eye(4)
    for g in gates:
        R = noisy_local_ptm(g, noise) @ R
    return R


def noisy_reset_ptm(noise: NoiseModel | None) -> np.ndarray:
    eps = 0.0 if noise is None else noise.eps_prep
    return bit_flip_ptm(eps) @ reset_ptm()


def noisy_prep_vector(k: int, noise: NoiseModel | None) -> np.ndarray:
    """Actual PTM vector produced when asking for column ``k`` of T."""
    zero = np.array([1.0, 0.0, 0.0, 1.0])
    return noisy_sequence_ptm(_PREP_GATES[k], noise) @ (noisy_reset_ptm(noise) @ zero)


def noisy_effects(j: int, noise: NoiseModel | None) -> np.ndarray:
    """Rows ``(E_0, E_1)``: effects of the two readout results for observable ``j``.

    Observable I always reports result 0 (value +1).
    """
    if j == 0:
        return np.array([[1.0, 0, 0, 0], [0.0, 0, 0, 0]])
    eps = 0.0 if noise is None else noise.eps_meas
    c = 1 - 2 * eps
    z = np.array([[0.5, 0, 0, 0.5 * c], [0.5, 0, 0, -0.5 * c]])
    return z @ noisy_sequence_ptm(_MEAS_GATES[j], noise)


def noisy_observable_row(j: int, noise: NoiseModel | None) -> np.ndarray:
    E = noisy_effects(j, noise)
    return E[0] - E[1]


@dataclass(frozen=True)
class NoisyDevice:
    """Product-noise device used to evaluate tomography circuits."""

    noise: NoiseModel
    n_qubits: int

    def prep_matrix(self) -> np.ndarray:
        cols = np.column_stack([noisy_prep_vector(k, self.noise) for k in range(4)])
        return kron_all([cols] * self.n_qubits)

    def measurement_matrix(self) -> np.ndarray:
        rows = np.vstack([noisy_observable_row(j, self.noise) for j in range(4)])
        return kron_all([rows] * self.n_qubits)
