"""Switch between numba-compiled kernels and the pure numpy fallbacks.

Set ``SICOMORE_DISABLE_NUMBA=1`` before import to force the numpy path.
"""
import os

_flag = os.environ.get("SICOMORE_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _flag not in ("1", "true", "yes", "on")


def njit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if numba is None:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
