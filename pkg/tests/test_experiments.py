import numpy as np
import pytest

from bsval.experiments import (
    ConfigError,
    Experiment,
    ExperimentConfig,
    bonafide_sweep,
    figure1,
    r_metrics,
    x_label,
)
from bsval.model import Law

SMALL = dict(m=8, n=3, k=5, trials=40, pool_size=4000, events_per_trial=200, bona_fide_events=300,
             burn_in=100, thinning=10, test_grid=[0.0, 0.947, 1.0], seed=2)


def test_config_defaults_match_paper_setting():
    cfg = ExperimentConfig()
    assert (cfg.m, cfg.n, cfg.k, cfg.trials, cfg.pool_size) == (16, 4, 100, 5000, 100_000)
    assert (cfg.events_per_trial, cfg.bona_fide_events, cfg.burn_in, cfg.thinning) == (1000, 1000, 1000, 100)
    assert cfg.cutoffs == [4, 3, 2]
    assert ExperimentConfig(n=1, m=4).cutoffs == [1, 0]


@pytest.mark.parametrize("change", [
    dict(n=20), dict(m=40, n=8, pool_size=10), dict(m=60, n=7), dict(trials=0), dict(test_grid=[1.2]),
    dict(chi2_formula="x"), dict(bona_fide="partial:0.5"), dict(cutoff_list=[5]), dict(input_modes=[0, 0, 1, 2]),
])
def test_config_validation(change):
    with pytest.raises(ConfigError):
        ExperimentConfig(**change).validate()


def test_unknown_config_key():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_sub_seeds_are_distinct():
    cfg = ExperimentConfig(seed=4)
    labels = ["matrix", "mcmc", "bona_fide", "clustering", "trials"]
    assert len({cfg.sub_seed(label) for label in labels}) == len(labels)


def test_full_cutoff_bona_fide_matches_ideal_run():
    exp = Experiment(ExperimentConfig(**SMALL))
    res = bonafide_sweep(exp, [3])
    curves = res["curves"]
    assert curves["approx-cutoff3"] == curves["ideal"]


def test_grid_without_threshold_point():
    exp = Experiment(ExperimentConfig(**{**SMALL, "test_grid": [1.0]}))
    res = figure1(exp)
    assert res["threshold"] is None
    ens = res["ensembles"][x_label(1.0)]
    assert ens.values.shape == (40,) and np.all(ens.values >= 0)


def test_r_metrics_report_degenerate():
    exp = Experiment(ExperimentConfig(**{**SMALL, "k": 1}))
    model, _ = exp.cluster_model(Law.ideal())
    r = r_metrics(exp.ensembles(model, [0.0, 0.947, 1.0]))
    assert r["degenerate"] and r["r1"] is None and r["r2"] is None
