"""Experiment pipelines behind the CLI: chi-squared ensembles along an x_ind
grid, k sweeps, bona fide sampler sweeps, Bayesian slope sweeps and the
distribution-structure analysis.

Every function here is a pure function of an :class:`ExperimentConfig`.
Stochastic stages draw from named sub-seeds of the master seed, so the
matrix, the MCMC pools, the bona fide events, the clustering and the trial
subsamples are independent of one another and of the thread count. Pools for
different x_ind values share the MCMC stream (common random numbers).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from . import analysis
from .clustering import ClusterModel, kmeans_fit
from .linalg import haar_random_unitary, is_unitary, load_matrix, unitarity_residual
from .model import (
    MAX_PATTERNS,
    MAX_PERMUTATION_PHOTONS,
    DistributionTable,
    Law,
    build_distribution,
    default_input,
)
from .samplers import EventSet, McmcConfig, sample_mcmc
from .seeds import derive_seed
from .validation import (
    Chi2Ensemble,
    DegenerateMetricError,
    GaussianSummary,
    bayesian_lnx,
    chi2_trials,
    expected_bayesian_slope,
    r1_metric,
    r2_metric,
)

THRESHOLD_X = 0.947
DEFAULT_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 0.947, 1.0)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    m: int = 16
    n: int = 4
    k: int = 100
    seed: int = 0
    bona_fide: str = "ideal"
    test_grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    pool_size: int = 100_000
    events_per_trial: int = 1000
    trials: int = 5000
    bona_fide_events: int = 1000
    burn_in: int = 1000
    thinning: int = 100
    chi2_formula: str = "standard"
    fit_method: str = "moments"
    input_modes: list | None = None
    matrix: str | None = None
    k_list: list = field(default_factory=lambda: [30, 50, 100, 120, 150])
    cutoff_list: list | None = None
    analysis_grid: list = field(default_factory=lambda: [round(0.05 * i, 2) for i in range(21)] + [THRESHOLD_X])
    max_iter: int = 300
    tol: float = 1e-6
    threads: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if isinstance(doc.get("mcmc"), dict):  # pragma: no cover - nested form
            mc = doc.pop("mcmc")
            doc.setdefault("burn_in", mc.get("burn_in", 1000))
            doc.setdefault("thinning", mc.get("thinning", 100))
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        doc = self.to_dict()
        doc.update(changes)
        return ExperimentConfig.from_dict(doc)

    def validate(self) -> None:
        try:
            if self.n < 1 or self.m < 1 or self.n > self.m:
                raise ConfigError(f"need 1 <= n <= m, got m={self.m}, n={self.n}")
            if math.comb(self.m, self.n) > MAX_PATTERNS:
                raise ConfigError(f"C({self.m},{self.n}) exceeds {MAX_PATTERNS} patterns")
            for name in ("k", "pool_size", "events_per_trial", "trials", "bona_fide_events", "thinning", "threads"):
                if int(getattr(self, name)) < 1:
                    raise ConfigError(f"{name} must be >= 1")
            if self.burn_in < 0:
                raise ConfigError("burn_in must be >= 0")
            for x in list(self.test_grid) + list(self.analysis_grid):
                if not 0.0 <= float(x) <= 1.0:
                    raise ConfigError(f"grid value {x} outside [0, 1]")
            if self.chi2_formula not in ("standard", "verbatim-eq6"):
                raise ConfigError(f"unknown chi2_formula {self.chi2_formula!r}")
            law = Law.parse(self.bona_fide)
            if law.kind == "partial":
                raise ConfigError("bona fide law must be ideal, approx, uniform or fd")
            if self.n > MAX_PERMUTATION_PHOTONS:
                raise ConfigError(
                    f"n = {self.n} > {MAX_PERMUTATION_PHOTONS}: the n! permutation sum for partial/approx "
                    "laws is outside desk scale"
                )
            for c in self.cutoffs:
                if not 0 <= int(c) <= self.n:
                    raise ConfigError(f"cutoff {c} outside [0, {self.n}]")
            if self.input_modes is not None:
                modes = sorted(int(v) for v in self.input_modes)
                if len(modes) != self.n or len(set(modes)) != self.n or modes[0] < 0 or modes[-1] >= self.m:
                    raise ConfigError(f"input_modes {self.input_modes} invalid for m={self.m}, n={self.n}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    @property
    def cutoffs(self) -> list:
        """Bona fide cutoffs; defaults to n, n-1, n-2 (4, 3, 2 at n = 4)."""
        if self.cutoff_list is not None:
            return [int(c) for c in self.cutoff_list]
        return [c for c in (self.n, self.n - 1, self.n - 2) if c >= 0]

    def sub_seed(self, *labels) -> int:
        return derive_seed(self.seed, *labels)

    @property
    def inputs(self) -> tuple:
        return tuple(sorted(self.input_modes)) if self.input_modes is not None else default_input(self.n)

    def mcmc(self, label: str) -> McmcConfig:
        return McmcConfig(self.burn_in, self.thinning, self.sub_seed(label))


def x_label(x: float) -> str:
    return f"{float(x):.3f}"


class Experiment:
    """Shared state for one configuration: the matrix and memoised tables/pools."""

    def __init__(self, config: ExperimentConfig, matrix=None):
        config.validate()
        self.config = config
        if matrix is not None:
            self.u = np.asarray(matrix, dtype=np.complex128)
        elif config.matrix:
            self.u = load_matrix(config.matrix)
        else:
            self.u = haar_random_unitary(config.m, config.sub_seed("matrix"))
        if self.u.shape != (config.m, config.m):
            raise ConfigError(f"matrix is {self.u.shape}, config says m = {config.m}")
        if not is_unitary(self.u):
            raise ConfigError(f"matrix is not unitary (residual {unitarity_residual(self.u):.3e})")
        self._tables: dict = {}
        self._pools: dict = {}

    def table(self, law: Law) -> DistributionTable:
        key = law.spec
        if key not in self._tables:
            self._tables[key] = build_distribution(self.u, law, self.config.inputs, seed=self.config.seed)
        return self._tables[key]

    def partial(self, x: float) -> DistributionTable:
        return self.table(Law.partial(float(x)))

    def pool(self, x: float) -> EventSet:
        key = x_label(x)
        if key not in self._pools:
            self._pools[key] = sample_mcmc(self.partial(x), self.config.pool_size, self.config.mcmc("mcmc"))
        return self._pools[key]

    def pools(self, xs) -> dict:
        xs = list(xs)
        missing = [x for x in xs if x_label(x) not in self._pools]
        for x in missing:
            self.table(Law.partial(float(x)))
        if self.config.threads > 1 and len(missing) > 1:
            def draw(x):
                return x_label(x), sample_mcmc(self.partial(x), self.config.pool_size, self.config.mcmc("mcmc"))

            with ThreadPoolExecutor(max_workers=self.config.threads) as ex:
                for key, pool in ex.map(draw, missing):
                    self._pools[key] = pool
        else:
            for x in missing:
                self.pool(x)
        return {x_label(x): self._pools[x_label(x)] for x in xs}

    def bona_fide_events(self, law: Law) -> EventSet:
        return sample_mcmc(self.table(law), self.config.bona_fide_events, self.config.mcmc("bona_fide"))

    def cluster_model(self, law: Law, k: int | None = None) -> tuple[ClusterModel, EventSet]:
        events = self.bona_fide_events(law)
        model = kmeans_fit(events, k or self.config.k, self.config.sub_seed("clustering"),
                           self.config.max_iter, self.config.tol)
        return model, events

    def ensembles(self, model: ClusterModel, xs) -> dict:
        pools = self.pools(xs)
        cfg = self.config
        out = {}
        for x in xs:
            out[x_label(x)] = run_trials(model, pools[x_label(x)], cfg, x)
        return out


def run_trials(model: ClusterModel, pool: EventSet, cfg: ExperimentConfig, x) -> Chi2Ensemble:
    if model.k == 1:
        # a single cluster holds every event, so both columns are proportional
        values = np.zeros(cfg.trials)
        return Chi2Ensemble(values, cfg.trials, cfg.events_per_trial, x, GaussianSummary(0.0, 0.0, cfg.fit_method, 0.0),
                            cfg.chi2_formula, 1, cfg.sub_seed("trials"))
    return chi2_trials(model, pool, cfg.events_per_trial, cfg.trials, cfg.sub_seed("trials"),
                       formula=cfg.chi2_formula, fit_method=cfg.fit_method, x_ind=float(x), threads=cfg.threads)


def r_metrics(ensembles: dict) -> dict:
    """r1 and r2 from ensembles at x = 0, 0.947 and 1; ``None`` marks a degenerate metric."""
    c0 = ensembles[x_label(0.0)].gaussian
    ct = ensembles[x_label(THRESHOLD_X)].gaussian
    c1 = ensembles[x_label(1.0)].gaussian
    out: dict[str, Any] = {"c0": c0.center, "c947": ct.center, "c1": c1.center, "b947": ct.fwhm}
    try:
        out["r1"] = r1_metric(c0.center, ct.center, c1.center)
    except DegenerateMetricError:
        out["r1"] = None
    try:
        out["r2"] = r2_metric(ct.center, c1.center, ct.fwhm)
    except DegenerateMetricError:
        out["r2"] = None
    out["degenerate"] = out["r1"] is None or out["r2"] is None
    return out


def _grid_with_anchors(grid) -> list:
    xs = sorted({float(x) for x in grid} | {0.0, THRESHOLD_X, 1.0})
    return xs


def figure1(exp: Experiment) -> dict:
    cfg = exp.config
    law = Law.parse(cfg.bona_fide)
    model, events = exp.cluster_model(law)
    grid = [float(x) for x in cfg.test_grid]
    ens = exp.ensembles(model, grid)
    rows = []
    for x in grid:
        e = ens[x_label(x)]
        rows.append({
            "x_ind": x,
            "center": e.gaussian.center,
            "fwhm": e.gaussian.fwhm,
            "center_stderr": e.gaussian.stderr,
            "degenerate_fit": cfg.trials < 2,
        })
    threshold = None
    if x_label(THRESHOLD_X) in ens:
        t = ens[x_label(THRESHOLD_X)].gaussian
        threshold = {"x_ind": THRESHOLD_X, "center": t.center, "fwhm": t.fwhm, "center_stderr": t.stderr}
    return {
        "model": model,
        "bona_fide_events": events,
        "ensembles": ens,
        "centers": rows,
        "threshold": threshold,
        "bayes": bayes_sweep(exp, grid),
    }


def bayes_sweep(exp: Experiment, grid=None) -> dict:
    """lnX slope for each pool along the grid, plus the exact expected slope."""
    cfg = exp.config
    grid = [float(x) for x in (cfg.test_grid if grid is None else grid)]
    ideal = exp.table(Law.ideal())
    pools = exp.pools(grid)
    rows = []
    traces = {}
    for x in grid:
        trace = bayesian_lnx(pools[x_label(x)], ideal)
        traces[x_label(x)] = trace
        summands = np.diff(np.concatenate([[0.0], trace.cumulative_lnx]))
        rows.append({
            "x_ind": x,
            "slope": trace.slope,
            "mean_summand": float(summands.mean()) if summands.size else 0.0,
            "expected_slope": expected_bayesian_slope(exp.partial(x), ideal),
            "n_events": trace.n_events,
            "skipped": trace.skipped,
        })
    return {"rows": rows, "traces": traces, "cfs_mass": ideal.cfs_mass}


def ksweep(exp: Experiment, k_list=None) -> dict:
    cfg = exp.config
    k_list = [int(k) for k in (cfg.k_list if k_list is None else k_list)]
    law = Law.parse(cfg.bona_fide)
    xs = [0.0, THRESHOLD_X, 1.0]
    rows, curves = [], {}
    events = exp.bona_fide_events(law)
    distinct = np.unique(events.indices).size
    for k in k_list:
        if k > distinct:
            raise ConfigError(f"k = {k} exceeds the {distinct} distinct bona fide events")
        model = kmeans_fit(events, k, cfg.sub_seed("clustering"), cfg.max_iter, cfg.tol)
        ens = exp.ensembles(model, xs)
        r = r_metrics(ens)
        rows.append({"k": k, **r, "iterations_used": model.iterations_used,
                     "fwhm0": ens[x_label(0.0)].gaussian.fwhm, "fwhm1": ens[x_label(1.0)].gaussian.fwhm})
        curves[k] = model.cumulative_counts()
    return {"rows": rows, "cumulative_counts": curves, "bona_fide_events": len(events)}


def bonafide_sweep(exp: Experiment, cutoffs=None) -> dict:
    cfg = exp.config
    cutoffs = cfg.cutoffs if cutoffs is None else [int(c) for c in cutoffs]
    laws = [("ideal", Law.ideal())]
    laws += [(f"approx-cutoff{c}", Law.approx(1.0, c)) for c in cutoffs]
    laws += [("uniform", Law.uniform()), ("fd", Law.fully_distinguishable())]
    grid = _grid_with_anchors(cfg.test_grid)
    rows, curves = [], {}
    for name, law in laws:
        model, _ = exp.cluster_model(law)
        ens = exp.ensembles(model, grid)
        r = r_metrics(ens)
        rows.append({"bona_fide": name, "law": law.spec, "n_cutoff": law.n_cutoff, **r})
        curves[name] = [
            {"x_ind": x, "center": ens[x_label(x)].gaussian.center, "fwhm": ens[x_label(x)].gaussian.fwhm,
             "center_stderr": ens[x_label(x)].gaussian.stderr}
            for x in grid
        ]
    return {"rows": rows, "curves": curves}


def structure_analysis(exp: Experiment) -> dict:
    """Cumulative curves, mean-L2 curves, shell statistics and the TVD matrix."""
    cfg = exp.config
    grid = sorted({float(x) for x in cfg.analysis_grid})
    sqrt2, sqrt6 = math.sqrt(2.0), math.sqrt(6.0)
    cumulative, mean_l2, shells, hist = {}, {}, [], {}
    for x in grid:
        tab = exp.partial(x)
        sd = analysis.sort_distribution(tab)
        cumulative[x_label(x)] = analysis.cumulative_probability(sd)
        mean_l2[x_label(x)] = analysis.mean_l2_curve(sd)
        lo = analysis.shell_probability(tab, "<=", sqrt2)
        hi = analysis.shell_probability(tab, ">=", sqrt6)
        shells.append({
            "x_ind": x,
            "le_sqrt2_total": lo[0], "le_sqrt2_mean": lo[1], "le_sqrt2_fraction": lo[2],
            "ge_sqrt6_total": hi[0], "ge_sqrt6_mean": hi[1], "ge_sqrt6_fraction": hi[2],
            "overall_mean": 1.0 / len(tab),
        })
        hist[x_label(x)] = analysis.l2_shell_histogram(tab)
    tvd = []
    for c in range(cfg.n):
        row = {"n_cutoff": c}
        for x in grid:
            row[x_label(x)] = analysis.total_variation_distance(exp.table(Law.approx(x, c)), exp.partial(x))
        tvd.append(row)
    return {"grid": grid, "cumulative": cumulative, "mean_l2": mean_l2, "shells": shells,
            "histogram": hist, "tvd": tvd}
