"""Selects the density-matrix kernel backend at import time.

The compiled Cython extension is preferred; the numpy implementation is the
fallback. Set ``NACQFL_PURE_PYTHON=1`` to force the fallback (used by the
kernel benchmark and for debugging).
"""

import os

from . import _kernels_py

if os.environ.get("NACQFL_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

apply_kraus_1q = _impl.apply_kraus_1q
apply_kraus_2q = _impl.apply_kraus_2q
BACKEND = _impl.BACKEND
