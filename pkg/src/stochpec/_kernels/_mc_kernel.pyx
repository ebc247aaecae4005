# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled PEC Monte Carlo block kernel; same inputs and uniforms as the numpy one."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _pick(const double[::1] cdf, double u) noexcept nogil:
    cdef Py_ssize_t i = 0, last = cdf.shape[0] - 1
    while i < last and cdf[i] <= u:
        i += 1
    return i


def run_block(const double[:, ::1] u, int t, const double[::1] prep_cdf,
              const double[:, ::1] prep_vecs, const signed char[::1] prep_signs,
              const double[:, ::1] unitary, const double[::1] op_cdf,
              const double[:, :, ::1] op_ptms, const signed char[::1] op_signs,
              const double[::1] meas_cdf, const double[:, :, ::1] meas_effects,
              const signed char[::1] meas_signs, double keep_prob):
    cdef Py_ssize_t n = u.shape[0]
    words = np.zeros(n, dtype=np.int64)
    signs = np.zeros(n, dtype=np.int8)
    cdef long long[::1] w_out = words
    cdef signed char[::1] s_out = signs
    cdef double v[16]
    cdef double tmp[16]
    cdef double mem[4]
    cdef double p0, p1, trace
    cdef Py_ssize_t r, s, c, a, b, i, k, ka, oi, j, z
    cdef int sign, natural, bit
    cdef long long word
    with nogil:
        for r in range(n):
            k = _pick(prep_cdf, u[r, 0])
            sign = prep_signs[k]
            for a in range(4):
                mem[a] = prep_vecs[k, a]
            word = 0
            for s in range(t):
                c = 1 + 5 * s
                ka = _pick(prep_cdf, u[r, c])
                sign *= prep_signs[ka]
                for a in range(4):
                    for b in range(4):
                        tmp[4 * a + b] = mem[a] * prep_vecs[ka, b]
                for i in range(16):
                    v[i] = 0.0
                    for a in range(16):
                        v[i] += unitary[i, a] * tmp[a]
                oi = _pick(op_cdf, u[r, c + 1])
                sign *= op_signs[oi]
                for i in range(16):
                    tmp[i] = 0.0
                    for a in range(16):
                        tmp[i] += op_ptms[oi, i, a] * v[a]
                j = _pick(meas_cdf, u[r, c + 2])
                sign *= meas_signs[j]
                p0 = 0.0
                p1 = 0.0
                for b in range(4):
                    p0 += tmp[b] * meas_effects[j, 0, b]
                    p1 += tmp[b] * meas_effects[j, 1, b]
                z = 1 if u[r, c + 3] >= p0 / (p0 + p1) else 0
                for a in range(4):
                    mem[a] = 0.0
                    for b in range(4):
                        mem[a] += tmp[4 * a + b] * meas_effects[j, z, b]
                trace = mem[0]
                for a in range(4):
                    mem[a] /= trace
                natural = 1 if meas_signs[j] * (1 - 2 * z) < 0 else 0
                if u[r, c + 4] < keep_prob:
                    bit = natural
                else:
                    bit = 1 - natural
                    sign = -sign
                word = word * 2 + bit
            w_out[r] = word
            s_out[r] = sign
    return words, signs
