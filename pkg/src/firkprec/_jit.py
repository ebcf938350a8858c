"""Numba switch shared by the sparse kernels.

Set ``FIRKPREC_DISABLE_NUMBA=1`` (or numba's own ``NUMBA_DISABLE_JIT=1``)
to run every kernel through its pure-Python/numpy path.  The flag is read
once at import time.
"""
import os

_FALSY = ("", "0", "false", "no", "off")


def _flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSY


try:
    if _flag("FIRKPREC_DISABLE_NUMBA") or _flag("NUMBA_DISABLE_JIT"):
        raise ImportError
    import numba

    USE_NUMBA = True
except ImportError:
    numba = None
    USE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when numba is active, identity decorator otherwise."""
    kwargs.setdefault("cache", True)
    if USE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]):
        return args[0]
    return lambda f: f


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
