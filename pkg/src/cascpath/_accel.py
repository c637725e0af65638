"""Numba acceleration switch for the hot numeric kernels.

Kernels are written in numpy code that numba can compile as-is.  By default
they are jitted; setting the environment variable ``CASCPATH_NO_NUMBA=1``
(before import) keeps them as plain numpy functions.  Both paths compute the
same thing; ``benchmarks/bench_kernels.py`` compares their speed.
"""

import os

NUMBA_DISABLED = os.environ.get("CASCPATH_NO_NUMBA", "").strip() in ("1", "true", "yes")

if not NUMBA_DISABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        numba = None
        NUMBA_DISABLED = True
else:
    numba = None

NUMBA_ENABLED = not NUMBA_DISABLED


def maybe_jit(func=None, **options):
    """Apply ``numba.njit`` unless disabled by CASCPATH_NO_NUMBA."""
    options.setdefault("cache", True)

    def wrap(f):
        if NUMBA_ENABLED:
            return numba.njit(**options)(f)
        return f

    if func is not None:
        return wrap(func)
    return wrap
