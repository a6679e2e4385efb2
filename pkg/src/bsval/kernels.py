"""Backend selection for the hot kernels.

The compiled extension is used when importable; setting the environment
variable ``BSVAL_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if os.environ.get("BSVAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

ryser_permanent = _impl.ryser_permanent
batch_permanents = _impl.batch_permanents
interference_terms = _impl.interference_terms
metropolis_chunk = _impl.metropolis_chunk

__all__ = [
    "BACKEND",
    "ryser_permanent",
    "batch_permanents",
    "interference_terms",
    "metropolis_chunk",
]
