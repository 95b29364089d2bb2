"""Hot sampling kernels with a numba path and a pure-numpy fallback.

The backend is chosen once, at import time, from the ``HARNESSLAB_BACKEND``
environment variable:

``numba``  compiled scalar loops (default when numba imports)
``numpy``  vectorized fallback, draw-for-draw identical up to last-ulp libm
           differences
``auto``   numba if available, else numpy

Both backends address random numbers with the same Philox4x32-10 counters
``(step-or-pair, sub-draw, path index, stream tag)`` keyed by the 64-bit root
seed, so a path depends only on ``(root, path index)``.
"""

import os

from . import _numpy

RNG_VERSION = "philox4x32-10/v2"


def _select(name):
    name = (name or "auto").strip().lower()
    if name not in ("auto", "numba", "numpy"):
        raise ValueError(f"HARNESSLAB_BACKEND must be numba, numpy or auto, got {name!r}")
    if name == "numpy":
        return "numpy", _numpy
    try:
        from . import _numba
    except ImportError:
        if name == "numba":
            raise
        return "numpy", _numpy
    return "numba", _numba


BACKEND, _impl = _select(os.environ.get("HARNESSLAB_BACKEND"))

levy_values = _impl.levy_values
bridge_sde_values = _impl.bridge_sde_values


def get_backend(name):
    """Return the kernel module for ``name`` ('numba' or 'numpy')."""
    return _select(name)[1]
