"""Hot-loop kernels, compiled when available.

The Cython extension ``drlyap._ckernels`` is used if it was built;
otherwise the numpy versions in ``drlyap._pykernels`` are used.  Set
``DRLYAP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"

if os.environ.get("DRLYAP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

poly_eval_batch = _impl.poly_eval_batch
lie_stats = _impl.lie_stats

__all__ = ["BACKEND", "poly_eval_batch", "lie_stats"]
