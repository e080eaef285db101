"""Numba switch.

Hot kernels are written in a loop style that numba compiles. Each one also has
a numpy twin that is used when numba is disabled or missing. Set
``GEOBOUND_NUMBA=0`` to force the numpy path.
"""

from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("GEOBOUND_NUMBA", "1").lower() not in ("0", "false", "no", "off")


def jit(fn):
    """``numba.njit(cache=True, nogil=True)`` when enabled, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


def is_jitted(fn) -> bool:
    return USE_NUMBA and isinstance(fn, numba.core.registry.CPUDispatcher)


def max_threads() -> int:
    try:
        n = int(os.environ.get("GEOBOUND_THREADS", "0"))
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n
