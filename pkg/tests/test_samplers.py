import numpy as np
import pytest

from bsval.analysis import total_variation_distance
from bsval.linalg import haar_random_unitary
from bsval.model import DistributionTable, Law, build_distribution
from bsval.samplers import EventSet, McmcConfig, sample_exact, sample_mcmc


def empirical_tvd(events, table):
    return total_variation_distance(events.frequencies(), table.probs)


def test_single_pattern_table():
    u = haar_random_unitary(4, seed=0)
    tab = build_distribution(u, Law.ideal(), n=4)
    assert len(tab) == 1
    assert np.all(sample_exact(tab, 50, seed=1).indices == 0)
    assert np.all(sample_mcmc(tab, 50, McmcConfig(10, 2, 1)).indices == 0)


def test_exact_uniform_within_five_sigma(u16):
    tab = build_distribution(u16, Law.uniform(), n=4)
    n = 100_000
    counts = sample_exact(tab, n, seed=5).counts()
    expected = n / 1820
    sigma = np.sqrt(n * (1 / 1820) * (1 - 1 / 1820))
    assert np.all(np.abs(counts - expected) <= 5 * sigma)


def test_exact_sampler_reproducible(ideal16):
    a = sample_exact(ideal16, 1000, seed=3)
    b = sample_exact(ideal16, 1000, seed=3)
    c = sample_exact(ideal16, 1000, seed=4)
    assert np.array_equal(a.indices, b.indices)
    assert not np.array_equal(a.indices, c.indices)


def test_exact_sampler_skips_zero_probability():
    probs = np.zeros(10)
    probs[[2, 7]] = [0.25, 0.75]
    tab = DistributionTable(5, 2, Law.ideal(), probs, 1.0, (0, 1))
    idx = sample_exact(tab, 4000, seed=0).indices
    assert set(idx.tolist()) == {2, 7}
    assert abs(np.mean(idx == 7) - 0.75) < 0.03


def test_mcmc_avoids_zero_probability_states():
    probs = np.zeros(10)
    probs[[0, 1, 4]] = [0.2, 0.3, 0.5]
    tab = DistributionTable(5, 2, Law.ideal(), probs, 1.0, (0, 1))
    events = sample_mcmc(tab, 3000, McmcConfig(100, 5, 2))
    assert set(events.indices.tolist()) <= {0, 1, 4}
    np.testing.assert_allclose(events.frequencies()[[0, 1, 4]], [0.2, 0.3, 0.5], atol=0.04)


def test_mcmc_matches_exact_within_five_sigma(u16):
    tab = build_distribution(u16, Law.partial(0.5), n=4)
    n = 100_000
    counts = sample_mcmc(tab, n, McmcConfig(1000, 100, 8)).counts()
    expected = n * tab.probs
    sigma = np.sqrt(n * tab.probs * (1 - tab.probs))
    inside = np.abs(counts - expected) <= 5 * sigma + 1e-12
    assert inside.mean() >= 0.99


def test_mcmc_reproducible_and_records_acceptance(ideal16):
    cfg = McmcConfig(500, 10, 21)
    a = sample_mcmc(ideal16, 2000, cfg)
    b = sample_mcmc(ideal16, 2000, cfg)
    assert np.array_equal(a.indices, b.indices)
    assert 0 < a.provenance["acceptance_rate"] <= 1
    assert a.method == "mcmc" and len(a) == 2000


def test_mcmc_chains_do_not_depend_on_threads(ideal16):
    cfg = McmcConfig(200, 5, 4)
    a = sample_mcmc(ideal16, 3001, cfg, chains=4, threads=1)
    b = sample_mcmc(ideal16, 3001, cfg, chains=4, threads=4)
    assert len(a) == 3001
    assert np.array_equal(a.indices, b.indices)


def test_mcmc_thinning_one_without_burn_in(ideal16):
    events = sample_mcmc(ideal16, 20_000, McmcConfig(0, 1, 2))
    assert len(events) == 20_000
    assert empirical_tvd(events, ideal16) < 0.2


def test_invalid_mcmc_config():
    with pytest.raises(ValueError):
        McmcConfig(-1, 10)
    with pytest.raises(ValueError):
        McmcConfig(10, 0)


def test_unconditioned_table_rejected(ideal16):
    bad = DistributionTable(16, 4, Law.ideal(), ideal16.probs * 2, 1.0, (0, 1, 2, 3))
    with pytest.raises(ValueError):
        sample_exact(bad, 10, seed=0)


def test_event_set_round_trip(tmp_path, ideal16):
    events = sample_mcmc(ideal16, 500, McmcConfig(100, 3, 9))
    events.save(tmp_path / "e.csv")
    back = EventSet.load(tmp_path / "e.csv")
    assert np.array_equal(back.indices, events.indices)
    assert back.provenance["acceptance_rate"] == events.provenance["acceptance_rate"]
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "event_index,pattern"
    assert lines[1].split(",")[0] == "0"


def test_event_set_views():
    ev = EventSet.from_patterns([(0, 1), (2, 4), (0, 1)], 5)
    assert ev.counts().sum() == 3 and ev.counts()[0] == 2
    np.testing.assert_array_equal(ev.occupations()[1], [0, 0, 1, 0, 1])
    assert [p.label for p in ev.events()] == ["0-1", "2-4", "0-1"]
    with pytest.raises(ValueError):
        EventSet(5, 2, [10])
