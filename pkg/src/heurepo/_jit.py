"""Optional numba acceleration.

Set ``HEUREPO_BACKEND=numpy`` to force the pure-numpy kernels even when numba
is installed; ``HEUREPO_BACKEND=numba`` fails loudly if numba is missing.
"""

from __future__ import annotations

import os

_requested = os.environ.get("HEUREPO_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(f"HEUREPO_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False
    if _requested == "numba":
        raise

BACKEND = _requested or ("numba" if HAVE_NUMBA else "numpy")


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise.

    The decorated loop kernels always exist, so tests can compare them with
    the numpy kernels regardless of which backend is active.
    """
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _numba_njit(*args, **kwargs)
