"""Backend selection for the numerical kernels.

The compiled extension is used when it imports; otherwise (or when the
``MASTERGEN_PURE_PYTHON`` environment variable is set to a non-empty value)
the pure-Python twin is used.  ``BACKEND`` names the active one.
"""

import os

from . import _pykernels

if os.environ.get("MASTERGEN_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

NO_POLE = _pykernels.NO_POLE

neumaier_sum = _impl.neumaier_sum
secular_sums = _impl.secular_sums
deflated_solve = _impl.deflated_solve
rk4_step = _impl.rk4_step
power_iterate = _impl.power_iterate


def backends():
    """Map of every importable backend name to its kernel module."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
