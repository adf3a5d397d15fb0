"""Numba switch.

Set ``LEFTRS_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python/numpy. The analysis engine then uses its vectorised numpy pass; the
simulator kernels run interpreted (correct, but slow on large systems).
"""

import os

DISABLED = os.environ.get("LEFTRS_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True

    def njit(fn=None, **kw):
        kw.setdefault("cache", True)
        if fn is None:
            return lambda f: numba.njit(**kw)(f)
        return numba.njit(**kw)(fn)

except ImportError:
    numba = None
    HAVE_NUMBA = False

    def njit(fn=None, **kw):
        if fn is None:
            return lambda f: f
        return fn
