"""Numba availability and the acceleration switch.

Hot kernels live in :mod:`stereospoof._kernels` in two equivalent forms: a
numba ``@njit`` version and a pure-numpy version. Which one backs the public
kernel names is decided once, at import time:

* ``STEREOSPOOF_NUMBA=0`` (also ``off``/``false``) forces the numpy path;
* anything else uses numba when it is importable and silently falls back to
  numpy when it is not.

Both paths perform the same arithmetic in the same order, so integer outputs
(LBP labels, codeword indices, cluster assignments) are bit-identical across
modes; ``benchmarks/bench_kernels.py`` times one against the other.
"""

import os

_FLAG = os.environ.get("STEREOSPOOF_NUMBA", "auto").strip().lower()

if _FLAG in ("0", "off", "false", "no"):
    NUMBA_ENABLED = False
    njit = None
else:
    try:
        from numba import njit  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - mirror environments without numba
        NUMBA_ENABLED = False
        njit = None


def jit(func):
    """Compile ``func`` with numba when acceleration is on, else return it."""
    if NUMBA_ENABLED:
        return njit(cache=True)(func)
    return func
