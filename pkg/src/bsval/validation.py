"""Validation statistics: cluster-occupancy chi-squared ensembles with
Gaussian-center metrology, and the Bayesian log-odds trace."""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import ClusterModel
from .model import DistributionTable
from .samplers import EventSet
from .seeds import derive_seed

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
CHI2_FORMULAS = ("standard", "verbatim-eq6")


class DegenerateMetricError(ValueError):
    pass


def chi2_statistic(counts, formula: str = "standard") -> float:
    """Contingency chi-squared of a k x 2 table of cluster counts.

    ``formula="standard"`` uses expected counts ``N_i N_j / N_total``. The
    ``"verbatim-eq6"`` variant divides by the number of clusters ``k``
    instead, which does not preserve the table total; it exists only for
    side-by-side comparison. Clusters with no events in either column add 0.
    """
    table = np.asarray(counts, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2:
        raise ValueError(f"expected a k x 2 table, got shape {table.shape}")
    if table.shape[0] < 2:
        raise ValueError("need at least two clusters")
    if np.any(table < 0):
        raise ValueError("counts must be non-negative")
    col = table.sum(axis=0)
    if np.any(col <= 0):
        raise ValueError("both samplers need at least one event")
    k = table.shape[0]
    row = table.sum(axis=1)
    keep = row > 0
    table, row = table[keep], row[keep]
    if formula == "standard":
        denom = col.sum()
    elif formula == "verbatim-eq6":
        denom = float(k)
    else:
        raise ValueError(f"unknown chi2 formula {formula!r}")
    expected = row[:, None] * col[None, :] / denom
    return float(np.sum((table - expected) ** 2 / expected))


@dataclass
class GaussianSummary:
    center: float
    fwhm: float
    method: str = "moments"
    stderr: float = 0.0


def gaussian_fit(values, method: str = "moments") -> GaussianSummary:
    """Gaussian center and FWHM of a sample.

    ``moments`` takes the sample mean and ``2 sqrt(2 ln 2)`` times the sample
    standard deviation. ``histogram-lsq`` least-squares fits a Gaussian curve
    to a density histogram, seeded from the moments.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size < 2:
        raise ValueError("gaussian_fit needs at least 2 values")
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1))
    stderr = sd / math.sqrt(vals.size)
    if method == "moments":
        return GaussianSummary(mean, FWHM_PER_SIGMA * sd, "moments", stderr)
    if method != "histogram-lsq":
        raise ValueError(f"unknown fit method {method!r}")
    if sd == 0.0:
        return GaussianSummary(mean, 0.0, method, 0.0)
    from scipy.optimize import curve_fit

    bins = max(10, int(math.sqrt(vals.size)))
    density, edges = np.histogram(vals, bins=bins, density=True)
    mids = 0.5 * (edges[1:] + edges[:-1])

    def curve(x, amp, c, s):
        return amp * np.exp(-0.5 * ((x - c) / s) ** 2)

    p0 = (1.0 / (sd * math.sqrt(2 * math.pi)), mean, sd)
    (amp, center, s), _ = curve_fit(curve, mids, density, p0=p0, maxfev=10000)
    return GaussianSummary(float(center), FWHM_PER_SIGMA * abs(float(s)), method, stderr)


@dataclass
class Chi2Ensemble:
    values: np.ndarray
    trials: int
    events_per_trial: int
    x_ind: float | None
    gaussian: GaussianSummary
    formula: str = "standard"
    k: int = 0
    seed: int | None = None

    def summary(self) -> dict:
        return {
            "center": self.gaussian.center,
            "fwhm": self.gaussian.fwhm,
            "center_stderr": self.gaussian.stderr,
            "method": self.gaussian.method,
            "x_ind": self.x_ind,
            "k": self.k,
            "seed": self.seed,
            "trials": self.trials,
            "events_per_trial": self.events_per_trial,
            "chi2_formula": self.formula,
        }

    def save(self, csv_path, json_path=None) -> None:
        csv_path = Path(csv_path)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        lines = ["trial_index,chi2"] + [f"{i},{v!r}" for i, v in enumerate(self.values.tolist())]
        csv_path.write_text("\n".join(lines) + "\n")
        json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def chi2_trials(model: ClusterModel, pool: EventSet, events_per_trial: int, trials: int, seed: int,
                formula: str = "standard", fit_method: str = "moments", x_ind=None,
                threads: int = 1) -> Chi2Ensemble:
    """Repeated chi-squared tests of pool subsamples against the bona fide clusters.

    Each trial draws ``events_per_trial`` events without replacement from the
    pool using its own stream ``(seed, trial)``, assigns them to clusters and
    compares the counts with the model's training ``member_counts``.
    With a single trial, no Gaussian fit is possible and the summary reports
    the value itself with zero width.
    """
    if formula not in CHI2_FORMULAS:
        raise ValueError(f"unknown chi2 formula {formula!r}")
    if events_per_trial < 1 or trials < 1:
        raise ValueError("events_per_trial and trials must be >= 1")
    if len(pool) < events_per_trial:
        raise ValueError(f"pool of {len(pool)} events is smaller than events_per_trial = {events_per_trial}")
    if pool.m != model.m:
        raise ValueError("pool and cluster model disagree on m")
    labels = model.pattern_assignment(pool.n)[pool.indices]
    bona = np.asarray(model.member_counts, dtype=np.int64)
    k = model.k
    full = events_per_trial == len(pool)

    def one(t: int) -> float:
        if full:
            chosen = labels
        else:
            rng = np.random.default_rng(derive_seed(seed, "trial", t))
            chosen = labels[rng.choice(len(labels), size=events_per_trial, replace=False)]
        test = np.bincount(chosen, minlength=k)
        return chi2_statistic(np.column_stack([bona, test]), formula)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            values = np.array(list(ex.map(one, range(trials))), dtype=float)
    else:
        values = np.array([one(t) for t in range(trials)], dtype=float)
    if trials >= 2:
        gauss = gaussian_fit(values, fit_method)
    else:
        gauss = GaussianSummary(float(values[0]), 0.0, fit_method, 0.0)
    return Chi2Ensemble(values, trials, events_per_trial, x_ind, gauss, formula, k, seed)


def r1_metric(c0: float, c947: float, c1: float) -> float:
    """Share of the full center range (x=0 to x=1) left above the threshold center."""
    if c1 == c0:
        raise DegenerateMetricError("c1 == c0: centers do not separate")
    return (c1 - c947) / (c1 - c0)


def r2_metric(c947: float, c1: float, b947: float) -> float:
    """Threshold-to-ideal center gap in units of the threshold FWHM."""
    if not b947 > 0:
        raise DegenerateMetricError(f"FWHM must be positive, got {b947}")
    return (c1 - c947) / b947


@dataclass
class BayesianTrace:
    cumulative_lnx: np.ndarray
    slope: float
    n_events: int
    skipped: int = 0

    def save(self, csv_path, json_path=None, **extra) -> None:
        csv_path = Path(csv_path)
        json_path = Path(json_path) if json_path else csv_path.with_suffix(".json")
        lines = ["event_index,cumulative_lnx"]
        lines += [f"{i},{v!r}" for i, v in enumerate(self.cumulative_lnx.tolist())]
        csv_path.write_text("\n".join(lines) + "\n")
        doc = {"slope": self.slope, "n_events": self.n_events, "skipped": self.skipped, **extra}
        json_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def lsq_slope(y) -> float:
    """Least-squares slope of ``y`` against its index."""
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        return float(y[0]) if y.size else 0.0
    i = np.arange(1, y.size + 1, dtype=float)
    ic = i - i.mean()
    return float(np.dot(ic, y - y.mean()) / np.dot(ic, ic))


def bayesian_summands(events: EventSet, ideal_table: DistributionTable) -> np.ndarray:
    """Per-event log-odds of ideal versus collision-free uniform; NaN where Pr(Q) = 0."""
    if ideal_table.law.kind not in ("ideal",) and not (
        ideal_table.law.kind == "partial" and ideal_table.law.x_ind == 1.0
    ):
        warnings.warn(f"Bayesian reference table has law {ideal_table.law.label}", RuntimeWarning, stacklevel=2)
    size = math.comb(ideal_table.m, ideal_table.n)
    pq = ideal_table.unconditioned[events.indices]
    with np.errstate(divide="ignore"):
        return np.where(pq > 0, np.log(pq / ideal_table.cfs_mass * size), np.nan)


def bayesian_lnx(events: EventSet, ideal_table: DistributionTable, m: int | None = None,
                 n: int | None = None) -> BayesianTrace:
    """Cumulative ln X over the event stream and its least-squares slope.

    Each event contributes ``ln(Pr(Q) / Pr_Q_CFS * C(m, n))``: the ideal
    probability relative to the ideal collision-free mass, against the
    collision-free uniform reference. Events with zero ideal probability are
    skipped with a warning.
    """
    m = ideal_table.m if m is None else m
    n = ideal_table.n if n is None else n
    if (events.m, events.n) != (m, n) or (ideal_table.m, ideal_table.n) != (m, n):
        raise ValueError("events, table and (m, n) disagree")
    terms = bayesian_summands(events, ideal_table)
    bad = np.isnan(terms)
    skipped = int(bad.sum())
    if skipped:
        warnings.warn(f"{skipped} events have zero ideal probability and were skipped", RuntimeWarning, stacklevel=2)
        terms = terms[~bad]
    cumulative = np.cumsum(terms)
    return BayesianTrace(cumulative, lsq_slope(cumulative), int(cumulative.size), skipped)


def expected_bayesian_slope(source: DistributionTable, ideal_table: DistributionTable) -> float:
    """Mean per-event log-odds when events follow ``source`` (exact, from the tables)."""
    size = math.comb(ideal_table.m, ideal_table.n)
    mask = source.probs > 0
    return float(np.sum(source.probs[mask] * np.log(ideal_table.probs[mask] * size)))
