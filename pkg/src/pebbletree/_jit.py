"""Kernel dispatch: numba-jitted hot loops with a pure-Python escape hatch.

Every traversal/solver kernel in this package is written as a plain function
over numpy arrays and passed through :func:`maybe_njit`.  By default the
kernels are compiled with ``numba.njit(cache=True)``; setting the environment
variable ``PEBBLETREE_JIT=0`` (checked once at import) leaves them as the
original Python functions.  The fallback is slow on big inputs but produces
bit-identical results, which the test suite exercises.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    numba = None

_flag = os.environ.get("PEBBLETREE_JIT", "1").strip().lower()
JIT_ENABLED = numba is not None and _flag not in {"0", "false", "off", "no"}


def maybe_njit(func):
    """Compile ``func`` with numba unless the Python fallback is selected."""
    if JIT_ENABLED:
        return numba.njit(cache=True)(func)
    return func


def backend() -> str:
    """Name of the active kernel backend, ``"numba"`` or ``"python"``."""
    return "numba" if JIT_ENABLED else "python"
