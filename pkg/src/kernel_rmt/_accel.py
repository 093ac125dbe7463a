"""Backend selection for the compiled hot loops.

The packed ternary kernels have two implementations: a numba-compiled loop
and a vectorized numpy path. The backend is picked once at import time from
the ``KERNEL_RMT_BACKEND`` environment variable (``"numba"`` or ``"numpy"``).
When the variable is unset, numba is used if it can be imported.
"""
from __future__ import annotations

import os
import warnings

ENV_FLAG = "KERNEL_RMT_BACKEND"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


def _resolve_backend() -> str:
    requested = os.environ.get(ENV_FLAG, "").strip().lower()
    if requested in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if requested not in ("numba", "numpy"):
        raise ValueError(f"{ENV_FLAG} must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and not HAVE_NUMBA:
        warnings.warn("numba requested but not importable; using numpy", RuntimeWarning)
        return "numpy"
    return requested


BACKEND = _resolve_backend()


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or an identity decorator without numba."""
    kwargs.setdefault("cache", True)
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def decorator(func):
        return func

    return decorator


def set_num_threads(n: int) -> None:
    """Bound the numba thread pool, when numba is present."""
    if HAVE_NUMBA:
        with warnings.catch_warnings():
            # launching the thread pool may complain about an old TBB; numba
            # then falls back to another threading layer on its own
            warnings.simplefilter("ignore", numba.NumbaWarning)
            numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
