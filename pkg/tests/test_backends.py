import os
import subprocess
import sys

import numpy as np
import pytest

from bsval import _fallback, kernels
from bsval.linalg import haar_random_unitary
from bsval.model import Law, build_distribution, pattern_array, permutation_orders
from bsval.samplers import McmcConfig, sample_mcmc

compiled = pytest.importorskip("bsval._kernels", reason="compiled extension not built")


@pytest.mark.parametrize("n", range(1, 9))
def test_ryser_backends_agree(n):
    rng = np.random.default_rng(n)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    c, p = compiled.ryser_permanent(a), _fallback.ryser_permanent(a)
    assert abs(c - p) <= 1e-10 * max(1.0, abs(p))


def test_table_kernels_agree():
    u = haar_random_unitary(10, seed=3)
    rows = np.arange(4, dtype=np.int64)
    pats = pattern_array(10, 4)
    np.testing.assert_allclose(compiled.batch_permanents(u, rows, pats),
                               _fallback.batch_permanents(u, rows, pats), rtol=1e-10, atol=1e-14)
    perms, orders = permutation_orders(4)
    tc, ic = compiled.interference_terms(u, rows, pats, perms, orders)
    tp, ip = _fallback.interference_terms(u, rows, pats, perms, orders)
    np.testing.assert_allclose(tc, tp, rtol=1e-10, atol=1e-14)
    assert ic <= 1e-10 and ip <= 1e-10


def test_metropolis_backends_give_identical_chains(monkeypatch):
    tab = build_distribution(haar_random_unitary(12, seed=5), Law.partial(0.7), n=3)
    cfg = McmcConfig(300, 7, 13)
    a = sample_mcmc(tab, 4000, cfg)
    monkeypatch.setattr(kernels, "metropolis_chunk", _fallback.metropolis_chunk)
    b = sample_mcmc(tab, 4000, cfg)
    assert np.array_equal(a.indices, b.indices)
    assert a.provenance["acceptance_rate"] == b.provenance["acceptance_rate"]


def test_environment_switch_forces_fallback():
    env = dict(os.environ, BSVAL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import bsval; print(bsval.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
    forced = os.environ.get("BSVAL_PURE_PYTHON", "") in ("1", "true", "yes")
    assert kernels.BACKEND == ("python" if forced else "cython")
