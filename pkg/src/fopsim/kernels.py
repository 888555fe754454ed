"""Backend selection for the hot lattice-march kernel.

The compiled extension ``fopsim._kernels`` is used when it imports; otherwise
the pure-Python version runs. Set ``FOPSIM_BACKEND=python`` to force the
fallback (the two are numerically identical up to floating-point summation
order, which is the same in both).
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_compiled = None

if os.environ.get("FOPSIM_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _compiled = None


def core_lengths(x0, y0, ux, uy, length, pitch, radius, backend=None):
    """Lateral length inside fiber cores for each ray segment."""
    use = backend or BACKEND
    if use == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel is not available")
        args = [np.ascontiguousarray(a, dtype=np.float64) for a in (x0, y0, ux, uy, length)]
        return _compiled.core_lengths(*args, float(pitch), float(radius))
    return _pykernels.core_lengths(x0, y0, ux, uy, length, pitch, radius)
