"""Numeric backend selection.

Hot kernels are written twice: a loop version compiled with numba and a
vectorized pure-numpy version.  The active backend is chosen once at import
time from the COUPLEWELFARE_BACKEND environment variable ("numba" or
"numpy", default "numba").  If numba is requested but not importable we
fall back to numpy silently.
"""

import os

_requested = os.environ.get("COUPLEWELFARE_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(
        f"COUPLEWELFARE_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

USE_NUMBA = _requested == "numba"
if USE_NUMBA:
    try:
        import numba  # noqa: F401
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Apply numba.njit when the numba backend is active, else no-op."""
    if USE_NUMBA:
        import numba

        return numba.njit(cache=True)(func)
    return func


def set_num_threads(n: int) -> None:
    """Pin the numba thread pool, clamped to the available cores;
    harmless no-op on the numpy backend."""
    if USE_NUMBA and n > 0:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
