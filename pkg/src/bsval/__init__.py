"""Simulation and validation of collision-free boson sampling with partially
distinguishable photons."""

__version__ = "0.1.0"

from .kernels import BACKEND
from .linalg import (
    haar_random_unitary,
    load_matrix,
    permanent_naive,
    permanent_ryser,
    save_matrix,
    submatrix_collision_free,
)
from .model import (
    DistinguishabilityModel,
    DistributionTable,
    Law,
    NumericalInvariantError,
    OutputPattern,
    approx_probability,
    build_distribution,
    enumerate_collision_free,
    ideal_probability,
    partial_probability,
)
from .samplers import EventSet, McmcConfig, sample_exact, sample_mcmc
from .clustering import ClusterModel, assign, kmeans_fit, kmeanspp_init, l2_distance
from .validation import (
    BayesianTrace,
    Chi2Ensemble,
    GaussianSummary,
    bayesian_lnx,
    chi2_statistic,
    chi2_trials,
    gaussian_fit,
    r1_metric,
    r2_metric,
)
from .analysis import (
    SortedDistribution,
    cumulative_probability,
    l2_shell_histogram,
    mean_l2_curve,
    shell_probability,
    total_variation_distance,
)
