"""Numba switch.

Hot loops in :mod:`corrtomo.kernels` are compiled with numba when it is
importable.  Set ``CORRTOMO_DISABLE_NUMBA=1`` to force the pure-numpy
implementations (useful for debugging and for benchmarking both paths).
"""

import os

try:
    from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


_FALSY = {"", "0", "false", "no", "off"}

USE_NUMBA = HAVE_NUMBA and os.environ.get("CORRTOMO_DISABLE_NUMBA", "").strip().lower() in _FALSY


def set_threads(n):
    """Cap numba's worker pool. No-op on the numpy path."""
    if USE_NUMBA and n:
        import numba
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
