"""Complex matrices, Haar-random unitaries and matrix permanents."""

from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np

from . import kernels

UNITARITY_TOL = 1e-10
RYSER_MAX_N = 30


class NotSquareError(ValueError):
    pass


def as_complex_matrix(a) -> np.ndarray:
    """Validate and return ``a`` as a finite 2-d complex128 array."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


def _square(a) -> np.ndarray:
    arr = as_complex_matrix(a)
    if arr.shape[0] != arr.shape[1]:
        raise NotSquareError(f"permanent needs a square matrix, got {arr.shape}")
    return arr


def unitarity_residual(u) -> float:
    """max |U^dagger U - I| entrywise."""
    u = np.asarray(u, dtype=np.complex128)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def is_unitary(u, tol: float = UNITARITY_TOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and unitarity_residual(u) <= tol


def haar_random_unitary(m: int, seed=None) -> np.ndarray:
    """Draw an m x m unitary from the Haar measure.

    QR of a complex Ginibre matrix, with the phases of diag(R) pushed back
    into Q so the result is Haar distributed rather than QR-biased.

    Parameters
    ----------
    m : int
        Dimension, ``m >= 1``.
    seed : int, numpy.random.SeedSequence or numpy.random.Generator, optional
        Fixed seeds give identical matrices.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def permanent_naive(a) -> complex:
    """Permanent by the permutation-sum definition. Oracle use only (n <= 8)."""
    a = _square(a)
    n = a.shape[0]
    if n > 8:
        raise ValueError("permanent_naive is limited to n <= 8")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)
    return complex(np.prod(a[np.arange(n), perms], axis=1).sum())


def permanent_ryser(a) -> complex:
    """Permanent by Ryser's inclusion-exclusion formula in Gray-code order.

    Each of the 2^n - 1 subset steps flips one column in or out of the running
    row sums, so the cost is O(n 2^n). The subset counter is limited to
    n <= 30.
    """
    a = _square(a)
    if a.shape[0] > RYSER_MAX_N:
        raise ValueError(f"permanent_ryser supports n <= {RYSER_MAX_N}")
    return complex(kernels.ryser_permanent(a))


def submatrix_collision_free(u, input_modes, output_modes) -> np.ndarray:
    """Rows ``input_modes`` x columns ``output_modes`` of ``u``, ascending order."""
    u = np.asarray(u, dtype=np.complex128)
    rows = np.sort(np.asarray(input_modes, dtype=np.int64))
    cols = np.sort(np.asarray(output_modes, dtype=np.int64))
    if rows.size != cols.size:
        raise ValueError(f"photon count mismatch: {rows.size} in, {cols.size} out")
    m = u.shape[0]
    for modes in (rows, cols):
        if modes.size and (modes.min() < 0 or modes.max() >= m):
            raise ValueError(f"mode index out of range [0, {m})")
        if np.unique(modes).size != modes.size:
            raise ValueError("patterns must be collision-free")
    return u[np.ix_(rows, cols)]


def save_matrix(u, path) -> None:
    """Write ``u`` as JSON with ``m``, ``re`` and ``im`` (row-major lists)."""
    u = np.asarray(u, dtype=np.complex128)
    doc = {
        "m": int(u.shape[0]),
        "re": u.real.ravel().tolist(),
        "im": u.imag.ravel().tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def load_matrix(path) -> np.ndarray:
    doc = json.loads(Path(path).read_text())
    m = int(doc["m"])
    re = np.asarray(doc["re"], dtype=np.float64)
    im = np.asarray(doc["im"], dtype=np.float64)
    if re.size != m * m or im.size != m * m:
        raise ValueError(f"matrix file {path} does not hold {m}x{m} entries")
    return as_complex_matrix((re + 1j * im).reshape(m, m))
