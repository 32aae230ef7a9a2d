"""Numba availability and backend selection.

The pointwise geometry kernels have two implementations: an ``@njit`` loop
version and a vectorised numpy version.  Set ``DISPFLOW_NUMBA=0`` to force the
numpy path (useful for debugging and for the benchmark comparison).
"""

import os


def _noop_jit(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(fn):
        return fn

    return wrap


def _have_numba():
    try:
        import numba  # noqa: F401

        return True
    except ImportError:
        return False


HAVE_NUMBA = _have_numba()
USE_NUMBA = HAVE_NUMBA and os.environ.get("DISPFLOW_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)

if HAVE_NUMBA:
    from numba import njit
else:
    njit = _noop_jit


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
