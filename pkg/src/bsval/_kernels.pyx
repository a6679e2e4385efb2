# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Gray-code Ryser permanents, interference-term tables and
the single-photon-swap Metropolis chain.

Call signatures match ``bsval._fallback`` exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport fabs

cnp.import_array()

ctypedef double complex cplx


cdef inline int _ctz(unsigned long long k) noexcept nogil:
    cdef int j = 0
    while not (k & 1):
        k >>= 1
        j += 1
    return j


cdef cplx _ryser(const cplx* a, int n, cplx* rowsums) noexcept nogil:
    # a is row-major n x n; rowsums is scratch of length n
    cdef unsigned long long k, bit, gray = 0
    cdef unsigned long long stop = (<unsigned long long>1) << n
    cdef int i, j, parity = 0
    cdef cplx total = 0, prod
    if n == 0:
        return 1
    for i in range(n):
        rowsums[i] = 0
    k = 1
    while k < stop:
        j = _ctz(k)
        bit = (<unsigned long long>1) << j
        if gray & bit:
            for i in range(n):
                rowsums[i] = rowsums[i] - a[i * n + j]
        else:
            for i in range(n):
                rowsums[i] = rowsums[i] + a[i * n + j]
        gray ^= bit
        parity ^= 1
        prod = rowsums[0]
        for i in range(1, n):
            prod = prod * rowsums[i]
        if parity:
            total = total - prod
        else:
            total = total + prod
        k += 1
    if n % 2:
        return -total
    return total


def ryser_permanent(a):
    """Permanent of a square complex matrix by Gray-code Ryser, O(n 2^n)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] arr = np.ascontiguousarray(a, dtype=np.complex128)
    cdef int n = arr.shape[0]
    cdef cplx* scratch = <cplx*>malloc((n + 1) * sizeof(cplx))
    cdef cplx out
    try:
        out = _ryser(<cplx*>arr.data, n, scratch)
    finally:
        free(scratch)
    return complex(out)


def batch_permanents(u, rows, patterns):
    """Permanents of U[rows, pattern] for every row of ``patterns``."""
    cdef const cplx[:, ::1] U = np.ascontiguousarray(u, dtype=np.complex128)
    cdef const long long[::1] R = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const long long[:, ::1] T = np.ascontiguousarray(patterns, dtype=np.int64)
    cdef Py_ssize_t count = T.shape[0], p
    cdef int n = R.shape[0], i, j
    out_arr = np.empty(count, dtype=np.complex128)
    cdef cplx[::1] out = out_arr
    cdef cplx* sub = <cplx*>malloc((n * n + 1) * sizeof(cplx))
    cdef cplx* scratch = <cplx*>malloc((n + 1) * sizeof(cplx))
    try:
        with nogil:
            for p in range(count):
                for i in range(n):
                    for j in range(n):
                        sub[i * n + j] = U[R[i], T[p, j]]
                out[p] = _ryser(sub, n, scratch)
    finally:
        free(sub)
        free(scratch)
    return out_arr


def interference_terms(u, rows, patterns, perms, orders):
    """Per-order sums of Perm(M o conj(M[:, sigma])) for every pattern.

    Returns ``(terms, max_imag)``; see ``bsval._fallback.interference_terms``.
    """
    cdef const cplx[:, ::1] U = np.ascontiguousarray(u, dtype=np.complex128)
    cdef const long long[::1] R = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const long long[:, ::1] T = np.ascontiguousarray(patterns, dtype=np.int64)
    cdef const long long[:, ::1] S = np.ascontiguousarray(perms, dtype=np.int64)
    cdef const long long[::1] D = np.ascontiguousarray(orders, dtype=np.int64)
    cdef Py_ssize_t count = T.shape[0], nperm = S.shape[0], p, s
    cdef int n = R.shape[0], i, j, d
    terms_arr = np.zeros((count, n + 1), dtype=np.float64)
    cdef double[:, ::1] terms = terms_arr
    cdef cplx* sub = <cplx*>malloc((n * n + 1) * sizeof(cplx))
    cdef cplx* had = <cplx*>malloc((n * n + 1) * sizeof(cplx))
    cdef cplx* scratch = <cplx*>malloc((n + 1) * sizeof(cplx))
    cdef cplx* acc = <cplx*>malloc((n + 1) * sizeof(cplx))
    cdef double max_imag = 0.0
    try:
        with nogil:
            for p in range(count):
                for i in range(n):
                    for j in range(n):
                        sub[i * n + j] = U[R[i], T[p, j]]
                for d in range(n + 1):
                    acc[d] = 0
                for s in range(nperm):
                    for i in range(n):
                        for j in range(n):
                            had[i * n + j] = sub[i * n + j] * sub[i * n + S[s, j]].conjugate()
                    acc[D[s]] = acc[D[s]] + _ryser(had, n, scratch)
                for d in range(n + 1):
                    terms[p, d] = acc[d].real
                    if fabs(acc[d].imag) > max_imag:
                        max_imag = fabs(acc[d].imag)
    finally:
        free(sub)
        free(had)
        free(scratch)
        free(acc)
    return terms_arr, max_imag


def metropolis_chunk(probs, lex_index, binom, occ, emp, long long state, pick_occ, pick_emp,
                     uniforms, long long burn_left, long long thinning, long long phase, out,
                     long long n_out):
    """Advance the single-photon-swap Metropolis chain over one block of randoms.

    See ``bsval._fallback.metropolis_chunk``.
    """
    cdef const double[::1] P = np.ascontiguousarray(probs, dtype=np.float64)
    cdef const long long[::1] L = np.ascontiguousarray(lex_index, dtype=np.int64)
    cdef const long long[:, ::1] B = np.ascontiguousarray(binom, dtype=np.int64)
    cdef long long[::1] O = occ
    cdef long long[::1] E = emp
    cdef const long long[::1] A = np.ascontiguousarray(pick_occ, dtype=np.int64)
    cdef const long long[::1] Bm = np.ascontiguousarray(pick_emp, dtype=np.int64)
    cdef const double[::1] W = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef long long[::1] Out = out
    cdef Py_ssize_t steps = W.shape[0], step, limit = Out.shape[0]
    cdef int n = O.shape[0], i, h
    cdef long long a, b, old_mode, new_mode, rank, cand, key
    cdef long long accepted = 0
    cdef double cur_p = P[state], cand_p
    cdef long long* srt = <long long*>malloc((n + 1) * sizeof(long long))
    try:
        with nogil:
            for step in range(steps):
                if n_out >= limit:
                    break
                a = A[step]
                b = Bm[step]
                old_mode = O[a]
                new_mode = E[b]
                O[a] = new_mode
                for i in range(n):
                    key = O[i]
                    h = i - 1
                    while h >= 0 and srt[h] > key:
                        srt[h + 1] = srt[h]
                        h -= 1
                    srt[h + 1] = key
                rank = 0
                for i in range(n):
                    rank += B[srt[i], i + 1]
                cand = L[rank]
                cand_p = P[cand]
                if cand_p >= cur_p or W[step] * cur_p < cand_p:
                    E[b] = old_mode
                    state = cand
                    cur_p = cand_p
                    accepted += 1
                else:
                    O[a] = old_mode
                if burn_left > 0:
                    burn_left -= 1
                else:
                    phase += 1
                    if phase == thinning:
                        phase = 0
                        Out[n_out] = state
                        n_out += 1
    finally:
        free(srt)
    return state, burn_left, phase, n_out, accepted
