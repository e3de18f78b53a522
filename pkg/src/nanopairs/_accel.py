"""Numba switch.

Set ``NANOPAIRS_DISABLE_NUMBA=1`` to run every hot kernel through its pure-numpy
path instead of the compiled loop. The flag is read once at import time.
"""
from __future__ import annotations

import os

__all__ = ["NUMBA_AVAILABLE", "USE_NUMBA", "njit", "prange", "set_threads", "fft_workers"]

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    NUMBA_AVAILABLE = False

_DISABLED = os.environ.get("NANOPAIRS_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
USE_NUMBA = NUMBA_AVAILABLE and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or a no-op decorator when numba is missing."""
    kwargs.setdefault("cache", True)
    if not NUMBA_AVAILABLE:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


if NUMBA_AVAILABLE:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


_THREADS = None


def set_threads(n: int | None) -> None:
    """Cap worker threads for FFTs and compiled kernels (None restores defaults)."""
    global _THREADS
    _THREADS = None if n is None else max(1, int(n))
    if NUMBA_AVAILABLE and _THREADS is not None:
        numba.set_num_threads(min(_THREADS, numba.config.NUMBA_NUM_THREADS))


def fft_workers() -> int | None:
    return _THREADS
