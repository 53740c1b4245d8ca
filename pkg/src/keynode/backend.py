"""Kernel backend selection.

Hot numeric loops ship in two flavours: numba ``@njit`` kernels and
pure-numpy fallbacks. The active backend is picked once at import time
from the ``KEYNODE_BACKEND`` environment variable:

    KEYNODE_BACKEND=numba   force numba (error if not installed)
    KEYNODE_BACKEND=numpy   force the numpy fallback path
    (unset)                 numba when importable, numpy otherwise

Both paths produce bitwise-identical results for the simulation kernels;
see tests/test_backend.py.
"""

import os
import warnings

_FLAG = os.environ.get("KEYNODE_BACKEND", "").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

if _FLAG not in ("", "numba", "numpy"):
    warnings.warn(f"unknown KEYNODE_BACKEND={_FLAG!r}, falling back to auto")
    _FLAG = ""

if _FLAG == "numba" and not HAVE_NUMBA:
    raise ImportError("KEYNODE_BACKEND=numba but numba is not installed")

USE_NUMBA = HAVE_NUMBA and _FLAG != "numpy"


def njit_maybe(**options):
    """Return ``numba.njit(**options)`` on the numba backend, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(**options)

    def _identity(func):
        return func

    return _identity


def set_threads(count: int) -> None:
    """Cap worker threads for parallel kernels. No-op bounds are clamped."""
    if count < 1:
        count = 1
    if USE_NUMBA:
        count = min(count, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(count)
    global _NUM_THREADS
    _NUM_THREADS = count


def get_threads() -> int:
    return _NUM_THREADS


_NUM_THREADS = os.cpu_count() or 1
if USE_NUMBA:
    _NUM_THREADS = min(_NUM_THREADS, numba.config.NUMBA_NUM_THREADS)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
