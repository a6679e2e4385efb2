"""Structure of output distributions: sorted cumulative probability, mean
2-norm distance to the most likely output, L2 shells and total variation
distance."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DistributionTable

SHELL_TOL = 1e-9


@dataclass(frozen=True)
class SortedDistribution:
    """Pattern order by descending probability, ties in lexicographic order."""

    order: np.ndarray
    base: DistributionTable

    @classmethod
    def of(cls, table: DistributionTable) -> "SortedDistribution":
        idx = np.arange(len(table))
        return cls(np.lexsort((idx, -table.probs)), table)

    @property
    def probs(self) -> np.ndarray:
        return self.base.probs[self.order]

    @property
    def top(self) -> int:
        return int(self.order[0])


def sort_distribution(table: DistributionTable) -> SortedDistribution:
    return SortedDistribution.of(table)


def _as_sorted(obj) -> SortedDistribution:
    return obj if isinstance(obj, SortedDistribution) else SortedDistribution.of(obj)


def cumulative_probability(sorted_dist) -> np.ndarray:
    """Prefix sums of the descending-sorted probabilities."""
    return np.cumsum(_as_sorted(sorted_dist).probs)


def shell_index(table: DistributionTable, reference: int | None = None) -> np.ndarray:
    """``l`` per pattern, where ``L2(T, T_ref) = sqrt(2 l)``; reference defaults to the top pattern."""
    ref = SortedDistribution.of(table).top if reference is None else reference
    patterns = table.patterns
    occ = np.zeros((len(table), table.m), dtype=np.int64)
    np.put_along_axis(occ, patterns, 1, axis=1)
    shared = occ @ occ[ref]
    return table.n - shared


def distances_from_top(table: DistributionTable) -> np.ndarray:
    return np.sqrt(2.0 * shell_index(table))


def mean_l2_curve(sorted_dist) -> np.ndarray:
    """Probability-weighted mean distance from the top output over the top N outputs.

    Entry ``N - 1`` averages over the ``N`` most likely outputs.
    """
    sd = _as_sorted(sorted_dist)
    dist = distances_from_top(sd.base)[sd.order]
    p = sd.probs
    mass = np.cumsum(p)
    weighted = np.cumsum(dist * p)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(mass > 0, weighted / mass, 0.0)


def shell_probability(table: DistributionTable, comparator: str, threshold: float):
    """Aggregate probability, mean per-pattern probability and share of the
    pattern space for outputs with ``L2 <= threshold`` (or ``>=``).

    Distances are measured from the most likely output; comparisons are made
    on ``L2**2`` with a 1e-9 tolerance.
    """
    d2 = 2.0 * shell_index(table)
    t2 = threshold**2
    if comparator in ("<=", "le"):
        mask = d2 <= t2 + SHELL_TOL
    elif comparator in (">=", "ge"):
        mask = d2 >= t2 - SHELL_TOL
    else:
        raise ValueError(f"comparator must be '<=' or '>=', got {comparator!r}")
    count = int(mask.sum())
    if count == 0:
        raise ValueError(f"empty shell for L2 {comparator} {threshold}")
    total = float(table.probs[mask].sum())
    return total, total / count, count / len(table)


def l2_shell_histogram(table: DistributionTable) -> dict:
    """``{l: (count, total_prob)}`` for l = 0..n, distances from the top output."""
    ls = shell_index(table)
    out = {}
    for l in range(table.n + 1):
        mask = ls == l
        out[l] = (int(mask.sum()), float(table.probs[mask].sum()))
    return out


def expected_shell_counts(m: int, n: int) -> dict:
    return {l: math.comb(n, l) * math.comb(m - n, l) for l in range(n + 1)}


def total_variation_distance(p, q) -> float:
    """Half the L1 distance between two tables (or probability vectors)."""
    if isinstance(p, DistributionTable) and isinstance(q, DistributionTable):
        if (p.m, p.n) != (q.m, q.n):
            raise ValueError(f"dimension mismatch: ({p.m},{p.n}) vs ({q.m},{q.n})")
    pv = p.probs if isinstance(p, DistributionTable) else np.asarray(p, dtype=float)
    qv = q.probs if isinstance(q, DistributionTable) else np.asarray(q, dtype=float)
    if pv.shape != qv.shape:
        raise ValueError(f"dimension mismatch: {pv.shape} vs {qv.shape}")
    return float(0.5 * np.abs(pv - qv).sum())


def format_percent(value: float) -> str:
    return f"{100.0 * value:.2f}%"
