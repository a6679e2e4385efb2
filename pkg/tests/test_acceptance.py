"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (also shown in the terminal summary) and
then asserts, so a failing criterion is reported, never hidden. Criteria 8-11
run the full-size protocol: m=16, n=4, k=100, 1000 bona fide events, 1000
events per trial, 5000 trials, pools of 10^5 MCMC events, seed 0.
"""

import math
import time
import warnings

import numpy as np
import pytest

from bsval import cli
from bsval.analysis import l2_shell_histogram, shell_probability, total_variation_distance
from bsval.experiments import Experiment, ExperimentConfig, bonafide_sweep, figure1, ksweep, x_label
from bsval.linalg import haar_random_unitary, permanent_naive, permanent_ryser
from bsval.model import (
    DistinguishabilityModel,
    Law,
    approx_probability,
    build_distribution,
    enumerate_collision_free,
    partial_probability,
)
from bsval.samplers import McmcConfig, sample_mcmc
from bsval.seeds import derive_seed
from bsval.validation import chi2_statistic

from conftest import all_occupations, fock_probability, record

GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 0.947, 1.0)


@pytest.fixture(scope="module")
def paper_exp():
    return Experiment(ExperimentConfig())


@pytest.fixture(scope="module")
def paper_figure1(paper_exp):
    start = time.perf_counter()
    res = figure1(paper_exp)
    res["elapsed"] = time.perf_counter() - start
    return res


def test_ac01_permanent_oracle():
    rng = np.random.default_rng(2024)
    mats = []
    for i in range(500):
        n = 2 + i % 7
        mats.append(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    start = time.perf_counter()
    worst = 0.0
    for a in mats:
        naive = permanent_naive(a)
        worst = max(worst, abs(permanent_ryser(a) - naive) / max(1.0, abs(naive)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 10.0
    record(1, ok, f"500 matrices n=2..8: worst rel err {worst:.2e} (tol 1e-9), {elapsed:.2f} s (< 10 s)")
    assert ok


def test_ac02_hom_closed_form():
    bs = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    errs = [abs(partial_probability(bs, (0, 1), (0, 1), DistinguishabilityModel(x, 2)) - (1 - x * x) / 2)
            for x in np.linspace(0, 1, 21)]
    ok = max(errs) <= 1e-10
    record(2, ok, f"21 grid points: max |P - (1-x^2)/2| = {max(errs):.2e} (tol 1e-10)")
    assert ok


def test_ac03_full_cutoff_equals_partial(u16):
    pats = enumerate_collision_free(16, 4)
    inp = (0, 1, 2, 3)
    worst = 0.0
    for x in (0.0, 0.5, 0.947, 1.0):
        dm = DistinguishabilityModel(x, 4)
        for p in pats:
            worst = max(worst, abs(approx_probability(u16, inp, p, dm, 4) - partial_probability(u16, inp, p, dm)))
        worst = max(worst, float(np.max(np.abs(
            build_distribution(u16, Law.approx(x, 4), n=4).probs - build_distribution(u16, Law.partial(x), n=4).probs))))
    ok = worst <= 1e-12
    record(3, ok, f"1820 patterns x 4 x-values: max |approx(n) - partial| = {worst:.2e} (tol 1e-12)")
    assert ok


def test_ac04_normalisation(u16):
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        laws = [Law.ideal(), Law.uniform(), Law.fully_distinguishable()]
        laws += [Law.partial(x) for x in GRID]
        laws += [Law.approx(x, c) for x in (0.5, 1.0) for c in range(5)]
        for law in laws:
            worst = max(worst, abs(build_distribution(u16, law, n=4).probs.sum() - 1.0))
    u4 = haar_random_unitary(4, seed=derive_seed(0, "fock"))
    fock = sum(fock_probability(u4, (0, 1), occ) for occ in all_occupations(4, 2))
    ok = worst <= 1e-9 and abs(fock - 1.0) <= 1e-9
    record(4, ok, f"{len(laws)} conditioned tables: max |sum - 1| = {worst:.1e}; "
                  f"full Fock space (4,2) sum = {fock:.15f} (tol 1e-9)")
    assert ok


def test_ac05_mcmc_fidelity(ideal16):
    tvd = lambda ev: total_variation_distance(ev.frequencies(), ideal16.probs)  # noqa: E731
    full = sample_mcmc(ideal16, 100_000, McmcConfig(1000, 100, derive_seed(0, "mcmc")))
    first = tvd(full)
    doubling = []
    for s in range(3):
        cfg = McmcConfig(1000, 100, derive_seed(s, "ac5"))
        doubling.append([tvd(sample_mcmc(ideal16, n, cfg)) for n in (25_000, 50_000, 100_000)])
    decreasing = all(a > b > c for a, b, c in doubling)
    ok = first < 0.05 and decreasing
    rows = "; ".join("/".join(f"{v:.4f}" for v in row) for row in doubling)
    record(5, ok, f"10^5 kept events: TVD {first:.4f} (< 0.05); doubling 25k/50k/100k per seed: {rows}")
    assert ok


def test_ac06_shell_combinatorics(ideal16):
    _, _, fraction = shell_probability(ideal16, "<=", math.sqrt(2))
    hist = l2_shell_histogram(ideal16)
    counts = {l: c for l, (c, _) in hist.items()}
    expected = {l: math.comb(4, l) * math.comb(12, l) for l in range(5)}
    ok = fraction == 49 / 1820 and counts == expected
    record(6, ok, f"fraction(L2<=sqrt2) = {fraction:.6f} = {100 * fraction:.4f}% (49/1820); "
                  f"shell counts {counts} vs C(4,l)C(12,l) {expected}")
    assert ok


def test_ac07_shell_probabilities():
    ideal, zero, overall = [], [], []
    for s in range(5):
        u = haar_random_unitary(16, derive_seed(s, "matrix"))
        tab1 = build_distribution(u, Law.ideal(), n=4)
        tab0 = build_distribution(u, Law.partial(0.0), n=4)
        ideal.append(shell_probability(tab1, "<=", math.sqrt(2))[1])
        zero.append(shell_probability(tab0, "<=", math.sqrt(2))[1])
        overall.append(tab1.probs.sum() / len(tab1))
    m1, m0 = float(np.mean(ideal)), float(np.mean(zero))
    exact_overall = all(abs(v - 1 / 1820) <= 1e-15 for v in overall)
    ok = 0.0015 <= m1 <= 0.0025 and 0.0014 <= m0 <= 0.0024 and exact_overall
    per1 = ", ".join(f"{100 * v:.3f}%" for v in ideal)
    per0 = ", ".join(f"{100 * v:.3f}%" for v in zero)
    record(7, ok, f"5-seed mean ideal {100 * m1:.3f}% in [0.15, 0.25] (seeds: {per1}); "
                  f"x=0 {100 * m0:.3f}% in [0.14, 0.24] (seeds: {per0}); overall mean 1/1820 = {100 / 1820:.4f}%")
    assert ok


def test_ac08_center_monotonicity(paper_figure1):
    rows = paper_figure1["centers"]
    xs = [r["x_ind"] for r in rows]
    centers = [r["center"] for r in rows]
    increasing = all(b > a for a, b in zip(centers, centers[1:]))
    per_unit = [(c1 - c0) / (x1 - x0) for x0, x1, c0, c1 in zip(xs, xs[1:], centers, centers[1:])]
    last_largest = per_unit[-1] == max(per_unit)
    elapsed = paper_figure1["elapsed"]
    ok = increasing and last_largest and elapsed < 1800
    detail = ", ".join(f"{x:g}:{c:.2f}+-{r['center_stderr']:.2f}" for x, c, r in zip(xs, centers, rows))
    record(8, ok, f"centers (trials=5000) {detail}; strictly increasing={increasing}, "
                  f"largest per-unit gap at 0.947->1={last_largest}; {elapsed:.0f} s (< 1800 s)")
    assert ok


def test_ac09_rmetric_ordering(paper_exp):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = bonafide_sweep(paper_exp, [4, 3, 2])
    by = {r["bona_fide"]: r for r in res["rows"]}
    r1 = [by[f"approx-cutoff{c}"]["r1"] for c in (4, 3, 2)]
    r2 = [by[f"approx-cutoff{c}"]["r2"] for c in (4, 3, 2)]
    valid = None not in r1 and None not in r2
    ok = valid and r1[0] > r1[1] > r1[2] and r2[0] > r2[1] > r2[2] and (r1[0] - r1[1]) < (r1[1] - r1[2])
    others = "; ".join(f"{name} r1={_f(by[name]['r1'])} r2={_f(by[name]['r2'])}" for name in ("ideal", "uniform", "fd"))
    record(9, ok, f"cutoff 4/3/2: r1 = {'/'.join(map(_f, r1))}, r2 = {'/'.join(map(_f, r2))} "
                  f"(need strictly decreasing, smaller 4->3 drop in r1); also {others}")
    assert ok


def test_ac10_ksweep_stability(paper_exp):
    res = ksweep(paper_exp, [30, 50, 100, 120, 150])
    by = {r["k"]: r for r in res["rows"]}
    ok = True
    parts = []
    for name in ("r1", "r2"):
        a, b, c = by[30][name], by[100][name], by[150][name]
        if None in (a, b, c):
            ok = False
            continue
        rel = abs(c - b) / abs(b) if b else math.inf
        ok = ok and b > a and rel < 0.2
        parts.append(f"{name}: k=30 {_f(a)}, k=100 {_f(b)}, k=150 {_f(c)} (rel change {rel:.1%})")
    table = ", ".join(f"k={k} ({_f(r['r1'])}, {_f(r['r2'])})" for k, r in by.items())
    record(10, ok, "; ".join(parts) + f"; all (r1, r2): {table}")
    assert ok


def test_ac11_bayesian_slope(paper_figure1):
    rows = paper_figure1["bayes"]["rows"]
    xs = [r["x_ind"] for r in rows]
    slopes = [r["slope"] for r in rows]
    increasing = all(b > a for a, b in zip(slopes, slopes[1:]))
    per_unit = [(s1 - s0) / (x1 - x0) for x0, x1, s0, s1 in zip(xs, xs[1:], slopes, slopes[1:])]
    steepest_last = per_unit[-1] == max(per_unit)
    ok = increasing and slopes[-1] > 0 and steepest_last
    detail = ", ".join(f"{x:g}:{s:.4f}" for x, s in zip(xs, slopes))
    record(11, ok, f"lnX slopes from 10^5-event pools {detail}; increasing={increasing}, "
                   f"positive at 1={slopes[-1] > 0}, steepest 0.947->1={steepest_last}")
    assert ok


def test_ac12_tvd_structure(u16):
    xs = [round(0.05 * i, 2) for i in range(21)] + [0.947]
    xs = sorted(set(xs))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        tvd = {c: [total_variation_distance(build_distribution(u16, Law.approx(x, c), n=4),
                                            build_distribution(u16, Law.partial(x), n=4)) for x in xs]
               for c in range(5)}
    increasing = {c: all(b > a for a, b in zip(tvd[c][1:], tvd[c][2:])) and tvd[c][1] > tvd[c][0] - 1e-15
                  for c in (0, 2, 3)}
    at_01 = {c: tvd[c][xs.index(0.1)] for c in range(4)}
    at_1 = [tvd[c][-1] for c in range(5)]
    monotone_cutoff = all(b <= a for a, b in zip(at_1, at_1[1:]))
    ok = all(increasing.values()) and max(at_01.values()) < 0.02 and monotone_cutoff
    record(12, ok, f"increasing in x for cutoffs 0/2/3: {increasing}; TVD at x=0.1: "
                   f"{', '.join(f'{v:.2e}' for v in at_01.values())} (< 0.02); at x=1 by cutoff 0..4: "
                   f"{', '.join(f'{v:.4f}' for v in at_1)} (non-increasing)")
    assert ok


AC13_CONFIG = ["--trials", "200", "--pool-size", "20000", "--seed", "3", "--k", "50", "--grid", "0,0.5,0.947,1",
               "--analysis-grid", "0,0.5,1"]
AC13_COMMANDS = [["matrix"], ["table", "--law", "partial:0.5"], ["sample", "--law", "ideal", "--count", "2000"],
                 ["clusters"], ["figure1"], ["ksweep", "--k-list", "30,50"], ["bonafide-sweep", "--cutoffs", "4,3"],
                 ["bayes"], ["analysis"]]


def _snapshot(path, skip=()):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name not in skip}


def test_ac13_determinism(tmp_path):
    byte_identical, thread_identical = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i, cmd in enumerate(AC13_COMMANDS):
            outs = []
            for run, threads in (("a", "1"), ("b", "1"), ("c", "4")):
                out = tmp_path / f"{i}{run}"
                assert cli.main(cmd + AC13_CONFIG + ["--threads", threads, "--out", str(out)]) == 0
                outs.append(out)
            byte_identical.append(_snapshot(outs[0]) == _snapshot(outs[1]))
            skip = {"manifest.json"}
            thread_identical.append(_snapshot(outs[0], skip) == _snapshot(outs[2], skip))
    ok = all(byte_identical) and all(thread_identical)
    names = [c[0] for c in AC13_COMMANDS]
    record(13, ok, f"{len(names)} commands ({', '.join(names)}): byte-identical reruns with --threads 1 "
                   f"{sum(byte_identical)}/{len(names)}; --threads 4 numeric outputs identical "
                   f"{sum(thread_identical)}/{len(names)}")
    assert ok


def test_ac14_chi2_unit():
    hand = chi2_statistic([[10, 0], [0, 10]])
    same = chi2_statistic([[4, 4], [9, 9], [2, 2]])
    table = np.array([[5, 9], [12, 3], [0, 7], [8, 8]])
    perm = chi2_statistic(table[[2, 0, 3, 1]])
    ok = abs(hand - 20.0) <= 1e-12 and same == 0.0 and abs(perm - chi2_statistic(table)) <= 1e-12
    record(14, ok, f"[[10,0],[0,10]] -> {hand:g} (20); identical columns -> {same:g}; "
                   f"row permutation {perm:.6f} vs {chi2_statistic(table):.6f}")
    assert ok


def _f(v):
    return "degenerate" if v is None else f"{v:.5f}"
