"""Kernel backend selection.

Set ``SWITCHSPDE_DISABLE_NUMBA=1`` before import to run every kernel on the
pure-numpy / pure-Python path. Both paths consume identical inputs, so the
flag changes speed, not results (agreement is checked in the test suite).
"""
import os

_flag = os.environ.get("SWITCHSPDE_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import numba as _numba
    NUMBA_AVAILABLE = True
except ImportError:
    _numba = None
    NUMBA_AVAILABLE = False


def jit(func):
    """Compile with numba in nopython mode when enabled, else return as is."""
    if NUMBA_AVAILABLE:
        return _numba.njit(cache=True)(func)
    return func


def backend_name():
    return "numba" if NUMBA_AVAILABLE else "numpy"
