"""Cost, variance and fidelity scaling of error-mitigated estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ValidationError
from ..ptm import X, NoiseModel, NoisyDevice, noisy_local_ptm, ptm_of_unitary
from .basis import build_basis_set
from .gst import EXACT, basis_hats, compute_hat, inverse_noise, run_gst
from .quasiprob import decompose_quasiprob


def sigma_mc(cost: float, n_mc: float, t: int = 1) -> float:
    if cost <= 0 or n_mc <= 0 or t < 1:
        raise ValidationError("cost, n_mc and t must be positive")
    return cost ** t / math.sqrt(n_mc)


def _as_vectors(P, Q):
    if isinstance(P, dict) or isinstance(Q, dict):
        P, Q = dict(P), dict(Q)
        keys = sorted(set(P) | set(Q))
        return (np.array([P.get(k, 0.0) for k in keys]),
                np.array([Q.get(k, 0.0) for k in keys]))
    P, Q = np.asarray(P, dtype=float), np.asarray(Q, dtype=float)
    n = max(P.size, Q.size)
    return np.pad(P, (0, n - P.size)), np.pad(Q, (0, n - Q.size))


def distribution_fidelity(P, Q) -> float:
    """Classical fidelity ``sum_i sqrt(p_i q_i)``; arrays or outcome-keyed dicts."""
    P, Q = _as_vectors(P, Q)
    for v in (P, Q):
        if v.min() < 0 or abs(v.sum() - 1.0) > 1e-9:
            raise ValidationError("fidelity needs two probability distributions")
    return float(min(1.0, np.sqrt(P * Q).sum()))


def predict_fidelity_perturbation(cost: float, t: int, n_mc: float, p_exact) -> float:
    """Leading-order expected ``1 - F`` between exact and estimated distributions."""
    p = np.asarray(p_exact, dtype=float)
    if p.min() <= 0:
        raise ValidationError("prediction undefined for zero-probability outcomes")
    return cost ** (2 * t) / (8.0 * n_mc) * float((1.0 / p).sum())


@dataclass(frozen=True)
class GstScaling:
    slope: float
    shots: tuple
    mean_errors: tuple
    costs: tuple
    exact_cost: float


def gst_error_scaling(noise: NoiseModel, shot_grid: Sequence, repetitions: int = 20,
                      seed: int = 0, unitary: np.ndarray = X) -> GstScaling:
    """Log-log slope of the estimation error of one single-qubit gate vs shots.

    Also returns the mean decomposition cost at each grid point; the grid may
    contain the exact-tomography sentinel, which is left out of the fit.
    """
    finite = [s for s in shot_grid if s != EXACT]
    if len(finite) >= 2 and max(finite) / min(finite) < 100:
        raise ValidationError("shot grid must span at least two decades")
    device = NoisyDevice(noise, 1)
    basis = build_basis_set(1)
    actual = noisy_local_ptm(unitary, noise)
    ops = basis.noisy_ptms(noise)
    exact_ptm = ptm_of_unitary(unitary)

    def one(shots, rng):
        gst = run_gst(device, [actual], ops, shots, rng)
        hat = compute_hat(gst, 0)
        cost = decompose_quasiprob(inverse_noise(exact_ptm, hat), basis_hats(gst)).cost
        return hat, cost

    hat_exact, cost_exact = one(EXACT, None)
    root = np.random.SeedSequence(seed)
    errors, costs = [], []
    for i, shots in enumerate(shot_grid):
        reps = 1 if shots == EXACT else repetitions
        errs, cs = [], []
        for r in range(reps):
            rng = np.random.default_rng(root.spawn(1)[0]) if shots != EXACT else None
            hat, cost = one(shots, rng)
            errs.append(np.abs(hat - hat_exact).max())
            cs.append(cost)
        errors.append(float(np.mean(errs)))
        costs.append(float(np.mean(cs)))
    fit = [(s, e) for s, e in zip(shot_grid, errors) if s != EXACT]
    slope = float("nan")
    if len(fit) >= 2:
        slope = float(np.polyfit(np.log([s for s, _ in fit]), np.log([e for _, e in fit]), 1)[0])
    return GstScaling(slope, tuple(shot_grid), tuple(errors), tuple(costs), cost_exact)
