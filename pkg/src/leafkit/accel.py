"""Backend selection for the numeric hot loops.

Kernels that dominate runtime (per-pixel color math, batched distance
computation) ship in two variants: a numba ``@njit`` loop and a vectorized
pure-numpy fallback. Both compute the same floating-point expressions in the
same order, so results are identical bit for bit.

The active backend is chosen once at import time from the environment:

    LEAFKIT_BACKEND=auto    use numba when importable (default)
    LEAFKIT_BACKEND=numba   require numba, error if missing
    LEAFKIT_BACKEND=numpy   force the pure-numpy path
"""

from __future__ import annotations

import os

_CHOICE = os.environ.get("LEAFKIT_BACKEND", "auto").strip().lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"LEAFKIT_BACKEND must be one of auto/numba/numpy, got {_CHOICE!r}"
    )

if _CHOICE == "numpy":
    _HAVE_NUMBA = False
else:
    try:
        from numba import njit  # noqa: F401

        _HAVE_NUMBA = True
    except ImportError:
        if _CHOICE == "numba":
            raise
        _HAVE_NUMBA = False


def numba_enabled() -> bool:
    """True when jitted kernels are the active backend."""
    return _HAVE_NUMBA


def backend_name() -> str:
    return "numba" if _HAVE_NUMBA else "numpy"


def jit_kernel(fn):
    """Compile ``fn`` with nopython numba when enabled, else return it as is.

    Compiled kernels are cached on disk so repeat runs skip JIT cost.
    """
    if _HAVE_NUMBA:
        from numba import njit

        return njit(cache=True)(fn)
    return fn
