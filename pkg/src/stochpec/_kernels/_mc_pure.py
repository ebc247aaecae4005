"""Vectorised numpy implementation of the PEC Monte Carlo block kernel."""

from __future__ import annotations

import numpy as np


def _pick(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)


def run_block(u, t, prep_cdf, prep_vecs, prep_signs, unitary, op_cdf, op_ptms,
              op_signs, meas_cdf, meas_effects, meas_signs, keep_prob):
    """Simulate ``len(u)`` runs; returns (outcome words, signs).

    Column layout of ``u``: memory prep, then per step ancilla prep, basis op,
    readout variant, readout result, relabel.
    """
    n = u.shape[0]
    k = _pick(prep_cdf, u[:, 0])
    mem = prep_vecs[k]
    sign = prep_signs[k].astype(np.int64)
    word = np.zeros(n, dtype=np.int64)
    for s in range(t):
        c = 1 + 5 * s
        ka = _pick(prep_cdf, u[:, c])
        sign *= prep_signs[ka]
        v = (mem[:, :, None] * prep_vecs[ka][:, None, :]).reshape(n, 16)
        v = v @ unitary.T
        oi = _pick(op_cdf, u[:, c + 1])
        sign *= op_signs[oi]
        for o in np.unique(oi):
            sel = oi == o
            v[sel] = v[sel] @ op_ptms[o].T
        j = _pick(meas_cdf, u[:, c + 2])
        sign *= meas_signs[j]
        E = meas_effects[j]
        V = v.reshape(n, 4, 4)
        p0 = (V[:, 0, :] * E[:, 0, :]).sum(axis=1)
        p1 = (V[:, 0, :] * E[:, 1, :]).sum(axis=1)
        z = u[:, c + 3] >= p0 / (p0 + p1)
        Ez = np.where(z[:, None], E[:, 1, :], E[:, 0, :])
        mem = (V * Ez[:, None, :]).sum(axis=2)
        mem = mem / mem[:, :1]
        natural = (meas_signs[j] * np.where(z, -1, 1)) < 0
        keep = u[:, c + 4] < keep_prob
        bit = np.where(keep, natural, ~natural).astype(np.int64)
        sign *= np.where(keep, 1, -1)
        word = word * 2 + bit
    return word, sign.astype(np.int8)
