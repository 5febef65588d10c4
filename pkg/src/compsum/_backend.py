"""Kernel backend selection.

Hot numeric kernels are written once in numba-compatible numpy and wrapped
with ``@jit``. By default the numba JIT is used; setting the environment
variable ``COMPSUM_NUMBA=0`` (or numba being unavailable) selects the pure
numpy path, which runs the identical source uncompiled.
"""

import os

_env = os.environ.get("COMPSUM_NUMBA", "1").strip().lower()
_want_numba = _env not in ("0", "false", "off", "no")

NUMBA_ENABLED = False

if _want_numba:
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def jit(func):
    """Wrap ``func`` with numba's nopython JIT, or return it unchanged."""
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(func)
    return func


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
