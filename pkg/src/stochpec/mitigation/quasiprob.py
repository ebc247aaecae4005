"""Signed decompositions of target maps over noisy basis operations."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..errors import NumericalError, SpanDeficiencyError, ValidationError
from ..ptm import t_matrix
from .gst import GstDataset, state_measurement_hats

RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class QuasiprobDecomposition:
    coefficients: np.ndarray
    residual: float = 0.0
    labels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float))

    @property
    def cost(self) -> float:
        return float(np.abs(self.coefficients).sum())

    @property
    def signs(self) -> np.ndarray:
        return np.where(self.coefficients < 0, -1, 1).astype(np.int8)

    @property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(np.abs(self.coefficients)) / self.cost
        c[-1] = 1.0
        return c

    def to_dict(self) -> dict:
        return {"coefficients": self.coefficients.tolist(), "cost": self.cost,
                "residual": self.residual, "labels": list(self.labels)}

    @classmethod
    def from_dict(cls, data: dict) -> "QuasiprobDecomposition":
        return cls(np.asarray(data["coefficients"]), data.get("residual", 0.0),
                   tuple(data.get("labels", ())))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def trivial(cls, size: int, index: int = 0) -> "QuasiprobDecomposition":
        q = np.zeros(size)
        q[index] = 1.0
        return cls(q)


def _check_residual(M: np.ndarray, q: np.ndarray, b: np.ndarray, shape) -> float:
    r = M @ q - b
    worst = int(np.argmax(np.abs(r)))
    res = float(abs(r[worst]))
    if res > RESIDUAL_TOL:
        idx = np.unravel_index(worst, shape)
        raise SpanDeficiencyError(
            f"target not reproduced by the basis: residual {res:.3e} at entry {tuple(map(int, idx))}")
    return res


def decompose_quasiprob(target: np.ndarray, basis_hats, labels=()) -> QuasiprobDecomposition:
    """Minimum-L1 coefficients with ``sum_i q_i B_i = target``.

    Solved as a linear program over ``q = q+ - q-``; equality rows are first
    reduced to an orthonormal set spanning the same constraints.
    """
    basis_hats = np.asarray(basis_hats, dtype=float)
    target = np.asarray(target, dtype=float)
    if basis_hats.ndim != 3 or basis_hats.shape[1:] != target.shape:
        raise ValidationError("basis maps and target must share one shape")
    M = basis_hats.reshape(len(basis_hats), -1).T
    b = target.reshape(-1)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    rank = int((s > s[0] * 1e-12).sum())
    # rows of U^T outside the range of M carry the feasibility residual only
    A_eq = s[:rank, None] * Vt[:rank]
    b_eq = U[:, :rank].T @ b
    k = M.shape[1]
    res = linprog(np.ones(2 * k), A_eq=np.hstack([A_eq, -A_eq]), b_eq=b_eq,
                  bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise NumericalError(f"linear program failed: {res.message}")
    q = res.x[:k] - res.x[k:]
    # solver tolerances leave ~1e-8 residuals; a min-norm correction removes them
    q += np.linalg.lstsq(M, b - M @ q, rcond=None)[0]
    q[np.abs(q) < 1e-13] = 0.0
    residual = _check_residual(M, q, b, target.shape)
    return QuasiprobDecomposition(q, residual, tuple(labels))


def decompose_state_measurement(gst: GstDataset
                                ) -> tuple[QuasiprobDecomposition, QuasiprobDecomposition]:
    """Exact |0...0> and Z-readout expressed in the gauge-frame preps and observables.

    Observables are indexed like Paulis; the Z-readout target is the
    all-Z observable row.
    """
    n = gst.n_qubits
    preps, obs = state_measurement_hats(gst)
    zero = t_matrix(n)[:, 0]
    z_row = np.zeros(4 ** n)
    z_row[int("3" * n, 4)] = 1.0
    try:
        q_rho = np.linalg.solve(preps, zero)
        q_meas = np.linalg.solve(obs.T, z_row)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular preparation/measurement system: {exc}") from exc
    res_rho = float(np.abs(preps @ q_rho - zero).max())
    res_meas = float(np.abs(q_meas @ obs - z_row).max())
    return (QuasiprobDecomposition(np.where(np.abs(q_rho) < 1e-14, 0.0, q_rho), res_rho),
            QuasiprobDecomposition(np.where(np.abs(q_meas) < 1e-14, 0.0, q_meas), res_meas))
