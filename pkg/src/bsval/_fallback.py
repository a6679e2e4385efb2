"""Pure numpy implementations of the hot kernels.

These mirror the compiled routines in ``_kernels.pyx`` argument-for-argument
and are used when the extension is not built (or ``BSVAL_PURE_PYTHON=1``).
"""

import numpy as np


def ryser_permanent(a):
    """Permanent of a square complex matrix by Gray-code Ryser, O(n 2^n)."""
    a = np.asarray(a, dtype=np.complex128)
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    rowsums = np.zeros(n, dtype=np.complex128)
    total = 0.0 + 0.0j
    gray = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        bit = 1 << j
        if gray & bit:
            rowsums -= a[:, j]
        else:
            rowsums += a[:, j]
        gray ^= bit
        prod = complex(np.prod(rowsums))
        if bin(gray).count("1") & 1:
            total -= prod
        else:
            total += prod
    return total if n % 2 == 0 else -total


def _batch_ryser(a):
    """Gray-code Ryser over a stack of matrices with shape (P, n, n)."""
    count, n = a.shape[0], a.shape[1]
    rowsums = np.zeros((count, n), dtype=np.complex128)
    total = np.zeros(count, dtype=np.complex128)
    gray = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        bit = 1 << j
        if gray & bit:
            rowsums -= a[:, :, j]
        else:
            rowsums += a[:, :, j]
        gray ^= bit
        prod = np.prod(rowsums, axis=1)
        if bin(gray).count("1") & 1:
            total -= prod
        else:
            total += prod
    return total if n % 2 == 0 else -total


def _submatrices(u, rows, patterns):
    return u[np.asarray(rows)[None, :, None], np.asarray(patterns)[:, None, :]]


def batch_permanents(u, rows, patterns):
    """Permanents of U[rows, pattern] for every row of ``patterns``."""
    u = np.ascontiguousarray(u, dtype=np.complex128)
    patterns = np.ascontiguousarray(patterns, dtype=np.int64)
    return _batch_ryser(_submatrices(u, rows, patterns))


def interference_terms(u, rows, patterns, perms, orders):
    """Per-order sums of Perm(M o conj(M[:, sigma])) for every pattern.

    Returns ``(terms, max_imag)`` where ``terms[p, d]`` is the real part of the
    sum over permutations with ``d`` non-fixed points and ``max_imag`` is the
    largest discarded imaginary residue.
    """
    u = np.ascontiguousarray(u, dtype=np.complex128)
    patterns = np.ascontiguousarray(patterns, dtype=np.int64)
    sub = _submatrices(u, rows, patterns)
    n = sub.shape[1]
    acc = np.zeros((sub.shape[0], n + 1), dtype=np.complex128)
    conj = np.conj(sub)
    for sigma, d in zip(perms, orders):
        acc[:, d] += _batch_ryser(sub * conj[:, :, sigma])
    max_imag = float(np.max(np.abs(acc.imag))) if acc.size else 0.0
    return np.ascontiguousarray(acc.real), max_imag


def metropolis_chunk(probs, lex_index, binom, occ, emp, state, pick_occ, pick_emp, uniforms,
                     burn_left, thinning, phase, out, n_out):
    """Advance the single-photon-swap Metropolis chain over one block of randoms.

    ``occ``/``emp`` hold the occupied/empty modes and are updated in place.
    ``state`` is the lexicographic index of the current pattern. Kept states
    are written to ``out`` starting at ``n_out``. Returns
    ``(state, burn_left, phase, n_out, accepted)``.
    """
    n = len(occ)
    limit = out.shape[0]
    occ_l = [int(v) for v in occ]
    emp_l = [int(v) for v in emp]
    binom_l = binom.tolist()
    lex_l = lex_index.tolist()
    probs_l = probs.tolist()
    pick_occ = pick_occ.tolist()
    pick_emp = pick_emp.tolist()
    uniforms = uniforms.tolist()
    accepted = 0
    cur_p = float(probs_l[state])
    for step in range(len(uniforms)):
        if n_out >= limit:
            break
        a = pick_occ[step]
        b = pick_emp[step]
        old_mode = occ_l[a]
        new_mode = emp_l[b]
        occ_l[a] = new_mode
        rank = 0
        for i, mode in enumerate(sorted(occ_l)):
            rank += binom_l[mode][i + 1]
        cand = int(lex_l[rank])
        cand_p = float(probs_l[cand])
        if cand_p >= cur_p or uniforms[step] * cur_p < cand_p:
            emp_l[b] = old_mode
            state = cand
            cur_p = cand_p
            accepted += 1
        else:
            occ_l[a] = old_mode
        if burn_left > 0:
            burn_left -= 1
        else:
            phase += 1
            if phase == thinning:
                phase = 0
                out[n_out] = state
                n_out += 1
    occ[:] = occ_l
    emp[:] = emp_l
    return state, burn_left, phase, n_out, accepted
