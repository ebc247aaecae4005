"""Linear-inversion gate set tomography in the Pauli transfer matrix picture."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from ..errors import DegenerateTomographyError, ValidationError
from ..ptm import NoisyDevice, t_matrix

EXACT = "exact"
MAX_CONDITION = 1e8
Shots = Union[int, str]


@dataclass
class GstDataset:
    """Tomography data: ``gram[j, k] = <<M_j|rho_k>>`` and ``<<M_j|O|rho_k>>`` per operator."""

    gram: np.ndarray
    op_matrices: list
    basis_matrices: list = field(default_factory=list)
    shots: Shots = EXACT

    @property
    def n_qubits(self) -> int:
        return int(round(np.log(self.gram.shape[0]) / np.log(4)))

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.gram))

    def to_dict(self) -> dict:
        return {"shots": self.shots, "gram": self.gram.tolist(),
                "op_matrices": [m.tolist() for m in self.op_matrices],
                "basis_matrices": [m.tolist() for m in self.basis_matrices],
                "condition": self.condition}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "GstDataset":
        return cls(np.asarray(data["gram"]), [np.asarray(m) for m in data["op_matrices"]],
                   [np.asarray(m) for m in data["basis_matrices"]], data["shots"])


def _estimate(expect: np.ndarray, shots: Shots, rng) -> np.ndarray:
    if shots == EXACT:
        return expect
    if not isinstance(shots, (int, np.integer)) or shots < 1:
        raise ValidationError(f"shots must be a positive integer or {EXACT!r}")
    p_plus = np.clip((1.0 + expect) / 2.0, 0.0, 1.0)
    return 2.0 * rng.binomial(int(shots), p_plus) / shots - 1.0


def run_gst(device: NoisyDevice, operators: Sequence[np.ndarray],
            basis: Sequence[np.ndarray] = (), shots: Shots = EXACT,
            rng: np.random.Generator | None = None) -> GstDataset:
    """Tomography of noisy operators given as their actual (hidden) PTMs.

    Every prep/observable pair is one circuit; in shot mode each circuit is run
    ``shots`` times and the +-1 outcomes averaged.
    """
    if shots != EXACT and rng is None:
        rng = np.random.default_rng(0)
    A = device.measurement_matrix()
    Sp = device.prep_matrix()
    dim = A.shape[0]
    for op in list(operators) + list(basis):
        if op.shape != (dim, dim):
            raise ValidationError(f"operator of shape {op.shape} on a {dim}-dim device")
    gram = _estimate(A @ Sp, shots, rng)
    ops = [_estimate(A @ op @ Sp, shots, rng) for op in operators]
    bases = [_estimate(A @ op @ Sp, shots, rng) for op in basis]
    data = GstDataset(gram, ops, bases, shots)
    if data.condition > MAX_CONDITION:
        raise DegenerateTomographyError(f"Gram matrix condition number {data.condition:.3g}")
    return data


def _hat(gram: np.ndarray, measured: np.ndarray) -> np.ndarray:
    n = int(round(np.log(gram.shape[0]) / np.log(4)))
    T = t_matrix(n)
    if np.linalg.cond(gram) > MAX_CONDITION:
        raise DegenerateTomographyError("Gram matrix is numerically singular")
    return T @ np.linalg.solve(gram, measured) @ np.linalg.inv(T)


def compute_hat(gst: GstDataset, which: int) -> np.ndarray:
    """Gauge-frame estimate ``T g^-1 O~ T^-1`` of operator ``which``."""
    return _hat(gst.gram, gst.op_matrices[which])


def basis_hats(gst: GstDataset) -> np.ndarray:
    if not gst.basis_matrices:
        return np.empty((0,) + gst.gram.shape)
    n = gst.n_qubits
    T = t_matrix(n)
    Tinv = np.linalg.inv(T)
    if gst.condition > MAX_CONDITION:
        raise DegenerateTomographyError("Gram matrix is numerically singular")
    ginv = np.linalg.inv(gst.gram)
    return np.array([T @ ginv @ m @ Tinv for m in gst.basis_matrices])


def inverse_noise(exact: np.ndarray, hat: np.ndarray) -> np.ndarray:
    """Map that undoes the estimated noise: ``exact @ hat^-1``."""
    if np.linalg.cond(hat) > MAX_CONDITION:
        raise DegenerateTomographyError("estimated operator is not invertible")
    inv = exact @ np.linalg.inv(hat)
    if np.abs(inv - np.eye(inv.shape[0])).max() > 1.0:
        warnings.warn("inverse noise map is far from identity; noise too strong "
                      "or tomography too coarse", RuntimeWarning, stacklevel=2)
    return inv


def state_measurement_hats(gst: GstDataset) -> tuple[np.ndarray, np.ndarray]:
    """Columns are the gauge-frame preparations, rows the gauge-frame observables."""
    T = t_matrix(gst.n_qubits)
    return T, gst.gram @ np.linalg.inv(T)
