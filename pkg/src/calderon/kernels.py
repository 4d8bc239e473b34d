"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
versions are used.  Setting ``CALDERON_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
scaled_exp1 = _pykernels.scaled_exp1
tridiag_solve = _pykernels.tridiag_solve
tridiag_factor = _pykernels.tridiag_factor

if os.environ.get("CALDERON_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        _ckernels = None
    if _ckernels is not None:
        BACKEND = "cython"
        scaled_exp1 = _ckernels.scaled_exp1
        tridiag_solve = _ckernels.tridiag_solve
