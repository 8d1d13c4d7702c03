"""JIT switch.

Set ``REEBSPIRAL_DISABLE_JIT=1`` to run every kernel as plain numpy code.
"""

import os

DISABLE_JIT = os.environ.get("REEBSPIRAL_DISABLE_JIT", "0").lower() not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not DISABLE_JIT

NUMBA_OPTS = {"cache": True, "nogil": True}


def kernel(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it untouched."""
    if USE_NUMBA:
        return numba.njit(**NUMBA_OPTS)(fn)
    return fn


def py_func(fn):
    """The pure-python body of a kernel (identity when JIT is off)."""
    return getattr(fn, "py_func", fn)
