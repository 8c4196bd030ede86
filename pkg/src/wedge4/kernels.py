"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when
``WEDGE4_PURE=1``) the numpy fallback is used. Both backends produce
bitwise-identical results.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("WEDGE4_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def pairwise_sum(x):
    """Sum with a fixed pairwise tree, independent of backend and threads."""
    return _impl.pairwise_sum(x)


def pairing_field(a, b):
    """Pointwise wedge pairing of two (6, ...) coefficient arrays, flattened."""
    return _impl.pairing_field(a, b)


def herm2_det(a, d, b, c):
    return _impl.herm2_det(a, d, b, c)
