"""Backend selection for the compiled kernels.

Numba is used when importable, unless ``COGACTION_DISABLE_NUMBA`` is set to a
truthy value, in which case every hot path falls back to vectorized numpy and
the kernels are never compiled. ``set_backend`` switches at runtime (tests and
the benchmark use it to compare both paths in one process).
"""
import os

_FALSY = ("", "0", "false", "no", "off")

DISABLED_BY_ENV = os.environ.get("COGACTION_DISABLE_NUMBA", "").strip().lower() not in _FALSY

try:
    if DISABLED_BY_ENV:
        raise ImportError("disabled by COGACTION_DISABLE_NUMBA")
    import numba

    NUMBA_AVAILABLE = True
except ImportError:
    numba = None
    NUMBA_AVAILABLE = False

_backend = "numba" if NUMBA_AVAILABLE else "numpy"


def njit(func):
    """``numba.njit(cache=True, nogil=True)`` or the identity when disabled."""
    if NUMBA_AVAILABLE:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def backend():
    return _backend


def use_numba():
    return _backend == "numba"


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    previous, _backend = _backend, name
    return previous
