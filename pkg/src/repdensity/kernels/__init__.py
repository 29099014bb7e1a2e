"""Backend selection for the sampler hot kernels.

The numba-compiled backend is used when importable. Set REPDENSITY_BACKEND
to "numpy" to force the pure numpy/scipy fallback, or to "numba" to fail
loudly when numba is unavailable. benchmarks/bench_sampler.py compares the
two on the same chains.
"""

import os

from . import numpy_backend

_requested = os.environ.get("REPDENSITY_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"REPDENSITY_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    _impl = numpy_backend
    BACKEND = "numpy"
else:
    try:
        from . import numba_backend as _impl
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = numpy_backend
        BACKEND = "numpy"


def get_backend(name):
    """Return a backend module by name ('numba' or 'numpy')."""
    if name == "numpy":
        return numpy_backend
    if name == "numba":
        from . import numba_backend
        return numba_backend
    raise ValueError(f"unknown backend {name!r}")


chol_update = _impl.chol_update
chol_downdate = _impl.chol_downdate
move_log_weights = _impl.move_log_weights
rebuild_slot = _impl.rebuild_slot
plain_sweep = _impl.plain_sweep
block_sweep = _impl.block_sweep
