"""Backend selection for the numeric kernels.

Set ``EVOLVABILITY_NUMBA=0`` before import to force the pure-numpy path.
Numba is used whenever it is importable and not disabled.
"""

import os

_FLAG = os.environ.get("EVOLVABILITY_NUMBA", "1").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it untouched.

    The un-jitted function is kept on ``.py_func`` either way so tests can call
    the loop version directly.
    """
    if not HAVE_NUMBA:
        func.py_func = func
        return func
    return numba.njit(cache=True, nogil=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
