"""Optional numba acceleration.

Hot loops (bisection closure, CSR products) have a numba path and a
pure-numpy path. Set ``JUMPFEM_DISABLE_NUMBA=1`` to force the numpy path;
it is also used automatically when numba cannot be imported.
"""
import os

_DISABLED = os.environ.get("JUMPFEM_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
