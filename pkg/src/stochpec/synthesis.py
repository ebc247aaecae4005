"""Model unitaries from memory states and their cosine-sine gate decomposition.

Qubit 0 is the most significant bit of a basis index. The model unitary acts
on ``memory (x) ancilla`` with the memory register first, so joint index is
``memory_index * ancilla_dim + symbol``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np
from scipy.linalg import cossin

from .errors import DimensionReductionError, NotUnitaryError, ValidationError
from .inference import MemoryStateSet

UNITARY_TOL = 1e-9


def _ceil_pow2(k: int) -> int:
    return 1 if k <= 1 else 1 << (k - 1).bit_length()


def unitarity_defect(U: np.ndarray) -> float:
    return float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())


@dataclass
class GramSchmidtBasis:
    """``gamma[i, k]``: coefficient of memory state ``k`` in basis vector ``e_i``.

    ``coords[:, k]`` are the coordinates of memory state ``k`` in the ``e``
    basis (upper triangular); ``gamma`` is the transpose of its inverse.
    """

    gamma: np.ndarray
    coords: np.ndarray


def gram_schmidt_basis(states: np.ndarray, tol: float = 1e-8) -> GramSchmidtBasis:
    m = states.shape[0]
    es = []
    coords = np.zeros((m, m))
    for k in range(m):
        v = states[k].astype(float).copy()
        for i, e in enumerate(es):
            coords[i, k] = e @ states[k]
            v -= coords[i, k] * e
        norm = np.linalg.norm(v)
        if norm < tol:
            raise DimensionReductionError(
                f"memory state {k} is linearly dependent on earlier states "
                f"(residual {norm:.2e}); merge the states with a looser tolerance")
        coords[k, k] = norm
        es.append(v / norm)
    gamma = np.linalg.inv(coords).T
    return GramSchmidtBasis(gamma, coords)


@dataclass
class ModelUnitary:
    matrix: np.ndarray
    memory_dim: int
    ancilla_dim: int
    memory_states: np.ndarray  # rows: memory states in the e basis, padded
    basis: GramSchmidtBasis
    probs: np.ndarray
    successor: dict
    column_defect: float = 0.0
    seed: int = 0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.dim)))


def build_unitary(states: MemoryStateSet, seed: int = 0) -> ModelUnitary:
    """Unitary ``U`` with ``U |s_k>|0> = sum_x sqrt(P(x|k)) |s_succ(k,x)>|x>``.

    Columns with a blank ancilla come from the Gram-Schmidt coefficients of the
    memory states; the rest are seeded random vectors orthonormalised against
    them. If statistical noise leaves the fixed columns slightly
    non-orthonormal they are replaced by their closest orthonormal set and the
    deviation is stored in ``column_defect``.
    """
    m = len(states)
    A = states.alphabet_size
    for k in range(m):
        for x in range(A):
            if states.probs[k, x] > 0 and (k, x) not in states.successor:
                raise ValidationError(f"state {k} has no successor on symbol {x}")
    basis = gram_schmidt_basis(states.states)
    d_mem, d_anc = _ceil_pow2(m), _ceil_pow2(A)
    dim = d_mem * d_anc
    images = np.zeros((dim, m))
    for k in range(m):
        for x in range(A):
            prob = states.probs[k, x]
            if prob > 0:
                succ = states.successor[(k, x)]
                images[x:m * d_anc:d_anc, k] += math.sqrt(prob) * basis.coords[:, succ]
    fixed = images @ basis.gamma.T  # column i' is U|e_i'>|0>
    overlap = fixed.T @ fixed
    defect = float(np.abs(overlap - np.eye(m)).max())
    if defect > 1e-12:
        w, V = np.linalg.eigh(overlap)
        if w.min() <= 0:
            raise DimensionReductionError("fixed columns are linearly dependent")
        fixed = fixed @ (V @ np.diag(w ** -0.5) @ V.T)
    rng = np.random.default_rng(seed)
    n_free = dim - m
    filler = rng.standard_normal((dim, n_free))
    Q, R = np.linalg.qr(np.hstack([fixed, filler]))
    Q = Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    fixed_idx = [i * d_anc for i in range(m)]
    free_idx = [j for j in range(dim) if j not in set(fixed_idx)]
    U = np.zeros((dim, dim), dtype=complex)
    U[:, fixed_idx] = fixed
    U[:, free_idx] = Q[:, m:]
    if unitarity_defect(U) > UNITARY_TOL:
        raise NotUnitaryError(f"constructed matrix is not unitary ({unitarity_defect(U):.2e})")
    mem = np.zeros((m, d_mem))
    mem[:, :m] = basis.coords.T
    return ModelUnitary(U, d_mem, d_anc, mem, basis, states.probs.copy(),
                        dict(states.successor), defect, seed)


def apply_model_step(U: np.ndarray, memory: np.ndarray, ancilla_dim: int = 2) -> np.ndarray:
    """``U (memory (x) |0>)`` as a joint state vector."""
    memory = np.asarray(memory, dtype=complex)
    if memory.size * ancilla_dim != U.shape[0]:
        raise ValidationError(
            f"memory of size {memory.size} with ancilla {ancilla_dim} does not match "
            f"unitary of size {U.shape[0]}")
    blank = np.zeros(ancilla_dim)
    blank[0] = 1.0
    return U @ np.kron(memory, blank)


def ancilla_marginal(joint: np.ndarray, ancilla_dim: int = 2) -> np.ndarray:
    return (np.abs(joint.reshape(-1, ancilla_dim)) ** 2).sum(axis=0)


def sample_outputs(model: ModelUnitary, steps: int, shots: int,
                   rng: np.random.Generator, initial: int = 0) -> np.ndarray:
    """Noiseless shot sampling; returns an array ``(shots, steps)`` of symbols."""
    d_anc = model.ancilla_dim
    blank_cols = model.matrix[:, ::d_anc]  # U restricted to a blank ancilla
    mem = np.tile(model.memory_states[initial].astype(complex), (shots, 1))
    out = np.empty((shots, steps), dtype=np.int64)
    for s in range(steps):
        joint = (mem @ blank_cols.T).reshape(shots, model.memory_dim, d_anc)
        probs = (np.abs(joint) ** 2).sum(axis=1)
        cdf = np.cumsum(probs, axis=1)
        u = rng.random(shots) * cdf[:, -1]
        x = (u[:, None] >= cdf).sum(axis=1).clip(max=d_anc - 1)
        out[:, s] = x
        mem = joint[np.arange(shots), :, x] / np.sqrt(probs[np.arange(shots), x])[:, None]
    return out


# --- gates -----------------------------------------------------------------

def rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def ry(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def zyz_matrix(gamma: float, phi: float, theta: float, lam: float) -> np.ndarray:
    return np.exp(1j * gamma) * rz(phi) @ ry(theta) @ rz(lam)


def zyz_angles(U: np.ndarray) -> tuple[float, float, float, float]:
    """``(gamma, phi, theta, lam)`` with ``U = e^{i gamma} Rz(phi) Ry(theta) Rz(lam)``."""
    gamma = 0.5 * np.angle(np.linalg.det(U))
    V = np.exp(-1j * gamma) * U
    theta = 2.0 * math.atan2(abs(V[1, 0]), abs(V[0, 0]))
    half_sum = np.angle(V[1, 1]) if abs(V[1, 1]) > 1e-14 else 0.0
    half_diff = np.angle(V[1, 0]) if abs(V[1, 0]) > 1e-14 else 0.0
    return float(gamma), float(half_sum + half_diff), float(theta), float(half_sum - half_diff)


@dataclass(frozen=True)
class MultiplexedRy:
    target: int
    controls: tuple[int, ...]
    angles: tuple[float, ...]

    def local(self, pattern: int) -> np.ndarray:
        return ry(self.angles[pattern])


@dataclass(frozen=True)
class MultiplexedRz:
    target: int
    controls: tuple[int, ...]
    angles: tuple[float, ...]

    def local(self, pattern: int) -> np.ndarray:
        return rz(self.angles[pattern])


@dataclass(frozen=True)
class SingleZYZ:
    target: int
    gamma: float
    phi: float
    theta: float
    lam: float
    controls: tuple[int, ...] = ()

    @property
    def angles(self) -> tuple[float, ...]:
        return (self.gamma, self.phi, self.theta, self.lam)

    def local(self, pattern: int) -> np.ndarray:
        return zyz_matrix(*self.angles)


@dataclass(frozen=True)
class NotGate:
    target: int
    controls: tuple[int, ...] = ()
    angles: tuple[float, ...] = ()

    def local(self, pattern: int) -> np.ndarray:
        if pattern == (1 << len(self.controls)) - 1:
            return np.array([[0, 1], [1, 0]], dtype=complex)
        return np.eye(2, dtype=complex)


@dataclass(frozen=True)
class ControlledU1:
    """Phase ``e^{i angle}`` on the subspace where target and all controls are 1."""

    angle: float
    controls: tuple[int, ...]
    target: int

    @property
    def angles(self) -> tuple[float, ...]:
        return (self.angle,)

    def local(self, pattern: int) -> np.ndarray:
        if pattern == (1 << len(self.controls)) - 1:
            return np.diag([1.0, np.exp(1j * self.angle)])
        return np.eye(2, dtype=complex)


Gate = Union[MultiplexedRy, MultiplexedRz, SingleZYZ, NotGate, ControlledU1]
GATE_KINDS = {cls.__name__: cls for cls in
              (MultiplexedRy, MultiplexedRz, SingleZYZ, NotGate, ControlledU1)}


def gate_qubits(gate: Gate) -> tuple[int, ...]:
    return (gate.target,) + tuple(gate.controls)


def gate_matrix(gate: Gate, n_qubits: int) -> np.ndarray:
    """Full ``2^n x 2^n`` matrix of one gate."""
    dim = 1 << n_qubits
    M = np.zeros((dim, dim), dtype=complex)
    tshift = n_qubits - 1 - gate.target
    cshifts = [n_qubits - 1 - c for c in gate.controls]
    for b in range(dim):
        pattern = 0
        for sh in cshifts:
            pattern = (pattern << 1) | ((b >> sh) & 1)
        local = gate.local(pattern)
        tb = (b >> tshift) & 1
        base = b & ~(1 << tshift)
        for out_bit in (0, 1):
            M[base | (out_bit << tshift), b] = local[out_bit, tb]
    return M


@dataclass
class GateCircuit:
    num_qubits: int
    gates: list = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            for q in gate_qubits(g):
                if not 0 <= q < self.num_qubits:
                    raise ValidationError(f"gate {g} touches qubit {q} outside register")
            if isinstance(g, (MultiplexedRy, MultiplexedRz)):
                if len(g.angles) != 1 << len(g.controls):
                    raise ValidationError("multiplexor needs 2^controls angles")

    @property
    def depth_reported(self) -> int:
        return len(self.gates)

    def to_records(self) -> list[dict]:
        return [{"kind": type(g).__name__, "qubits": list(gate_qubits(g)),
                 "angles": [float(a) for a in g.angles]} for g in self.gates]

    def to_json(self) -> str:
        return json.dumps({"num_qubits": self.num_qubits, "gates": self.to_records()})

    @classmethod
    def from_records(cls, num_qubits: int, records: list[dict]) -> "GateCircuit":
        gates = []
        for r in records:
            kind, qubits, angles = r["kind"], r["qubits"], tuple(r["angles"])
            target, controls = qubits[0], tuple(qubits[1:])
            if kind == "SingleZYZ":
                gates.append(SingleZYZ(target, *angles, controls=controls))
            elif kind == "ControlledU1":
                gates.append(ControlledU1(angles[0], controls, target))
            elif kind == "NotGate":
                gates.append(NotGate(target, controls))
            elif kind in ("MultiplexedRy", "MultiplexedRz"):
                gates.append(GATE_KINDS[kind](target, controls, angles))
            else:
                raise ValidationError(f"unknown gate kind {kind!r}")
        return cls(num_qubits, gates)

    @classmethod
    def from_json(cls, text: str) -> "GateCircuit":
        data = json.loads(text)
        return cls.from_records(data["num_qubits"], data["gates"])


def reconstruct(circuit: GateCircuit) -> np.ndarray:
    U = np.eye(1 << circuit.num_qubits, dtype=complex)
    for g in circuit.gates:
        U = gate_matrix(g, circuit.num_qubits) @ U
    return U


def _embed_angles(angles, n_outer: int) -> tuple[float, ...]:
    """Angles active only when every outer control is 1."""
    full = [0.0] * ((1 << n_outer) * len(angles))
    full[-len(angles):] = [float(a) for a in angles]
    return tuple(full)


def _decompose(U: np.ndarray, qubits: list[int], outer: tuple[int, ...]) -> list:
    if len(qubits) == 1:
        gamma, phi, theta, lam = zyz_angles(U)
        q = qubits[0]
        if not outer:
            return [SingleZYZ(q, gamma, phi, theta, lam)]
        k = len(outer)
        gates = [MultiplexedRz(q, outer, _embed_angles([lam], k)),
                 MultiplexedRy(q, outer, _embed_angles([theta], k)),
                 MultiplexedRz(q, outer, _embed_angles([phi], k))]
        gates.append(ControlledU1(gamma, outer[:-1], outer[-1]))
        return gates
    half = U.shape[0] // 2
    (u1, u2), theta, (v1, v2) = cossin(U, p=half, q=half, separate=True)
    top, rest = qubits[0], qubits[1:]
    gates = _block_diagonal(v1, v2, top, rest, outer)
    gates.append(MultiplexedRy(top, outer + tuple(rest),
                               _embed_angles(2.0 * np.asarray(theta), len(outer))))
    gates += _block_diagonal(u1, u2, top, rest, outer)
    return gates


def _block_diagonal(alpha, beta, top, rest, outer) -> list:
    # diag(a, b) = (X (x) I)(I (+) a)(X (x) I)(I (+) b), rightmost acts first
    gates = _decompose(beta, rest, outer + (top,))
    gates.append(NotGate(top))
    gates += _decompose(alpha, rest, outer + (top,))
    gates.append(NotGate(top))
    return gates


def csd_decompose(U: np.ndarray, tol: float = UNITARY_TOL) -> GateCircuit:
    """Recursive cosine-sine decomposition into multiplexed rotations.

    Block-diagonal factors are split with NOT conjugation into controlled
    blocks until single-qubit blocks remain, which become ZYZ rotations
    (controlled ones as multiplexed Rz/Ry plus a controlled phase).
    The global phase is kept, so ``reconstruct`` returns ``U`` exactly.
    """
    U = np.asarray(U, dtype=complex)
    dim = U.shape[0]
    if U.shape != (dim, dim) or dim < 2 or dim & (dim - 1):
        raise ValidationError("need a square matrix of power-of-two size >= 2")
    defect = unitarity_defect(U)
    if defect > tol:
        raise NotUnitaryError(f"input deviates from unitarity by {defect:.2e}")
    n = dim.bit_length() - 1
    return GateCircuit(n, _decompose(U, list(range(n)), ()))


def circuit_depth_formula(n: int, t: int = 1) -> int:
    if n < 1 or t < 1:
        raise ValidationError("need n >= 1 and t >= 1")
    return t * (7 * 4 ** (n - 1) + 5 * sum(4 ** i for i in range(n - 1)))


def matrix_to_json(M: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M)]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]
