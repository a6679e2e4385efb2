import numpy as np
import pytest

from bsval.clustering import ClusterModel, assign, kmeans_fit, kmeanspp_init, l2_distance
from bsval.model import OutputPattern
from bsval.samplers import EventSet, McmcConfig, sample_mcmc


def test_l2_distance_examples():
    p = OutputPattern.from_modes((0, 1, 2, 3), 16)
    q = OutputPattern.from_modes((0, 1, 2, 4), 16)
    r = OutputPattern.from_modes((8, 9, 10, 11), 16)
    assert l2_distance(p, p) == 0.0
    assert l2_distance(p, q) == pytest.approx(np.sqrt(2))
    assert l2_distance(p, r) == pytest.approx(np.sqrt(8))
    with pytest.raises(ValueError):
        l2_distance(np.zeros(3), np.zeros(4))


def test_kmeanspp_single_centroid_is_an_event():
    events = EventSet.from_patterns([(0, 1), (2, 3), (1, 4)], 5)
    c = kmeanspp_init(events, 1, seed=4)
    occ = events.occupations()
    assert c.shape == (1, 5)
    assert any(np.array_equal(c[0], row) for row in occ)


@pytest.mark.parametrize("seed", range(10))
def test_kmeanspp_two_points_picks_the_other(seed):
    pts = np.array([[0.0, 0.0]] * 5 + [[10.0, 10.0]] * 3)
    c = kmeanspp_init(pts, 2, seed)
    assert not np.array_equal(c[0], c[1])


def test_kmeanspp_distinct_centroids_at_paper_scale(ideal16):
    events = sample_mcmc(ideal16, 1000, McmcConfig(1000, 100, 1))
    c = kmeanspp_init(events, 100, seed=7)
    assert np.unique(c, axis=0).shape[0] == 100


def test_kmeanspp_requires_enough_distinct_events():
    events = EventSet.from_patterns([(0, 1), (0, 1), (2, 3)], 5)
    with pytest.raises(ValueError):
        kmeanspp_init(events, 3, seed=0)


def test_k_equals_distinct_events_gives_zero_radii():
    events = EventSet.from_patterns([(0, 1), (0, 1), (2, 3), (1, 4), (2, 3)], 5)
    model = kmeans_fit(events, 3, seed=1)
    assert np.all(model.radii == 0)
    assert sorted(model.member_counts.tolist()) == [1, 2, 2]


def test_k_one_gives_mean():
    events = EventSet.from_patterns([(0, 1), (0, 2), (3, 4)], 5)
    model = kmeans_fit(events, 1, seed=0)
    np.testing.assert_allclose(model.centroids[0], events.occupations().mean(axis=0))
    assert model.member_counts.tolist() == [3]


def test_two_blobs_recovered():
    rng = np.random.default_rng(0)
    left = [tuple(sorted(rng.choice(6, 3, replace=False))) for _ in range(60)]
    right = [tuple(sorted(10 + rng.choice(6, 3, replace=False))) for _ in range(40)]
    events = EventSet.from_patterns(left + right, 16)
    model = kmeans_fit(events, 2, seed=3)
    labels = model.labels
    assert len(set(labels[:60])) == 1 and len(set(labels[60:])) == 1
    assert labels[0] != labels[60]
    hist = model.wcss_history
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


def test_tie_goes_to_lowest_index():
    centroids = np.full((10, 4), 5.0)
    centroids[2] = [1, 0, 0, 0]
    centroids[7] = [0, 1, 0, 0]
    model = ClusterModel(10, 4, centroids, np.ones(10, dtype=int), np.zeros(10))
    assert assign(model, np.array([0.0, 0.0, 0.0, 0.0])) == 2
    assert assign(model, centroids[7]) == 7


def test_fit_invariants_and_replay(ideal16):
    events = sample_mcmc(ideal16, 1000, McmcConfig(1000, 100, 2))
    model = kmeans_fit(events, 100, seed=5)
    assert model.member_counts.sum() == 1000
    assert np.all(model.member_counts >= 0)
    assert model.iterations_used < 300
    occ = events.occupations()
    replay = np.array([assign(model, row) for row in occ])
    assert np.array_equal(replay, model.labels)
    for c in range(model.k):
        members = occ[model.labels == c]
        if len(members):
            np.testing.assert_allclose(model.centroids[c], members.mean(axis=0), atol=1e-6)
    curve = model.cumulative_counts()
    assert np.all(np.diff(curve) >= 0) and curve[-1] == 1000
    # every pattern in the space gets exactly one cluster
    assign_all = model.pattern_assignment(4)
    assert assign_all.shape == (1820,) and assign_all.max() < 100


def test_fit_reproducible(ideal16):
    events = sample_mcmc(ideal16, 500, McmcConfig(100, 10, 3))
    a = kmeans_fit(events, 20, seed=8)
    b = kmeans_fit(events, 20, seed=8)
    assert np.array_equal(a.centroids, b.centroids)
    assert np.array_equal(a.member_counts, b.member_counts)


def test_model_json_round_trip(tmp_path, ideal16):
    events = sample_mcmc(ideal16, 300, McmcConfig(100, 10, 4))
    model = kmeans_fit(events, 10, seed=2)
    model.save(tmp_path / "c.json")
    back = ClusterModel.load(tmp_path / "c.json")
    assert np.array_equal(back.centroids, model.centroids)
    assert np.array_equal(back.member_counts, model.member_counts)
    assert back.iterations_used == model.iterations_used
