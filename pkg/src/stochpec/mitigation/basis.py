"""Implementable CPTP basis operations (13 on one qubit, 241 on two)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from ..errors import ValidationError
from ..ptm import (H, I2, S, SDG, X, Y, Z, NoiseModel, embed_ptm, noisy_local_ptm,
                   noisy_reset_ptm, reset_ptm)

# an instruction is ("gate", qubits, local unitary) or ("reset", (qubit,), None)


@dataclass(frozen=True)
class BasisOperation:
    label: str
    instructions: tuple

    def ptm(self, n: int, noise: NoiseModel | None = None) -> np.ndarray:
        """Ideal PTM when ``noise`` is None, else every step followed by its noise."""
        R = np.eye(4 ** n)
        for kind, qubits, U in self.instructions:
            if kind == "reset":
                local = reset_ptm() if noise is None else noisy_reset_ptm(noise)
            else:
                local = noisy_local_ptm(U, noise)
            R = embed_ptm(local, qubits, n) @ R
        return R


@dataclass(frozen=True)
class BasisOperationSet:
    n_qubits: int
    operations: tuple

    def __len__(self) -> int:
        return len(self.operations)

    @property
    def labels(self) -> list[str]:
        return [op.label for op in self.operations]

    def ideal_ptms(self) -> np.ndarray:
        return np.array([op.ptm(self.n_qubits) for op in self.operations])

    def noisy_ptms(self, noise: NoiseModel) -> np.ndarray:
        return np.array([op.ptm(self.n_qubits, noise) for op in self.operations])


def _ry(angle):
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _controlled(u):
    return np.block([[np.eye(2), np.zeros((2, 2))], [np.zeros((2, 2)), u]]).astype(complex)


CX = _controlled(X)
CS = _controlled(S)
CH = _controlled(H)
SWAP = np.eye(4)[[0, 2, 1, 3]].astype(complex)
ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]])

# single-qubit gate sequences in time order (first element acts first)
_SINGLE_UNITARIES = (
    ("id", ()),
    ("X", (X,)),
    ("Y", (Y,)),
    ("Z", (Z,)),
    ("H.Sdg.H", (H, SDG, H)),
    ("S.H.Sdg.H.Sdg", (SDG, H, SDG, H, S)),
    ("Sdg", (SDG,)),
    ("S.H.Sdg", (SDG, H, S)),
    ("H", (H,)),
    ("H.Sdg.H.S.H", (H, S, H, SDG, H)),
)
# preparations: reset to |0> followed by gates
_SINGLE_PREPS = (
    ("P+", (H,)),
    ("Py+", (H, S)),
    ("P0", ()),
)


def _single_ops(q: int):
    ops = [(label, tuple(("gate", (q,), g) for g in gates))
           for label, gates in _SINGLE_UNITARIES]
    ops += [(label, (("reset", (q,), None),) + tuple(("gate", (q,), g) for g in gates))
            for label, gates in _SINGLE_PREPS]
    return ops


# K = S.H; conjugation V o core o V^dagger is built as V^dagger, core, V in time order
_K = (H, S)
_KDG = (SDG, H)
_CONJ = {"K": (_K, _KDG), "Kdg": (_KDG, _K), "id": ((), ())}
_NINE = [("K", "K"), ("K", "Kdg"), ("K", "id"), ("Kdg", "K"), ("Kdg", "Kdg"),
         ("Kdg", "id"), ("id", "K"), ("id", "Kdg"), ("id", "id")]

_CORES = (
    ("CX", (("gate", (0, 1), CX),)),
    ("X1.CX.X1", (("gate", (0,), X), ("gate", (0, 1), CX), ("gate", (0,), X))),
    ("CS", (("gate", (0, 1), CS),)),
    ("CH", (("gate", (0, 1), CH),)),
    ("CHX", (("gate", (0,), _ry(-math.pi / 4)), ("gate", (0, 1), CX),
             ("gate", (0,), _ry(math.pi / 4)))),
    ("CX.H1", (("gate", (0,), H), ("gate", (0, 1), CX))),
    ("SWAP.H1", (("gate", (0,), H), ("gate", (0, 1), SWAP))),
)
_SWAP_PATTERNS = [("id", "K"), ("id", "Kdg"), ("id", "id")]
_ISWAP_PATTERNS = [(a, b) for a in ("K", "id") for b in ("K", "Kdg", "id")]


def _conjugated(core_label, core, pattern):
    before, after = [], []
    for q, name in enumerate(pattern):
        v, v_dg = _CONJ[name]
        before += [("gate", (q,), g) for g in v_dg]
        after += [("gate", (q,), g) for g in v]
    label = f"{pattern[0]},{pattern[1]}|{core_label}"
    return BasisOperation(label, tuple(before) + tuple(core) + tuple(after))


def build_basis_set(n_qubits: int) -> BasisOperationSet:
    if n_qubits == 1:
        return BasisOperationSet(1, tuple(BasisOperation(lab, ins) for lab, ins in _single_ops(0)))
    if n_qubits != 2:
        raise ValidationError("basis sets exist for 1 or 2 qubits only")
    ops = []
    for (la, ia), (lb, ib) in product(_single_ops(0), _single_ops(1)):
        ops.append(BasisOperation(f"{la}(x){lb}", ia + ib))
    for label, core in _CORES:
        ops += [_conjugated(label, core, pat) for pat in _NINE]
    ops += [_conjugated("SWAP", (("gate", (0, 1), SWAP),), pat) for pat in _SWAP_PATTERNS]
    ops += [_conjugated("iSWAP", (("gate", (0, 1), ISWAP),), pat) for pat in _ISWAP_PATTERNS]
    return BasisOperationSet(2, tuple(ops))
