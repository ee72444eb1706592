"""Optional numba acceleration.

Kernels in :mod:`celltrack.kernels` are compiled with ``numba.njit`` when
numba imports cleanly and ``CELLTRACK_DISABLE_NUMBA`` is unset (or "0").
Otherwise the pure-numpy implementations are used.
"""
import os

_FLAG = os.environ.get("CELLTRACK_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no")

try:
    import numba

    NUMBA_INSTALLED = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_INSTALLED = False

USE_NUMBA = NUMBA_INSTALLED and not DISABLED_BY_ENV


def njit(func):
    """``numba.njit(cache=True)`` if numba is installed, else identity.

    Compilation is lazy, so decorating costs nothing when the numpy path is
    selected.
    """
    if not NUMBA_INSTALLED:
        return func
    return numba.njit(cache=True)(func)


def backend():
    return "numba" if USE_NUMBA else "numpy"
