"""Backend selection for the filter-bank kernels.

The Cython extension is used when it was built; otherwise (or when the
environment variable ``THRESHREG_PURE_PYTHON`` is set to a non-empty value)
the numpy implementation is used.  Both expose ``forward`` and ``inverse``
with identical signatures.
"""

from __future__ import annotations

import os

from threshreg import _pycore

if os.environ.get("THRESHREG_PURE_PYTHON"):
    forward, inverse = _pycore.forward, _pycore.inverse
    BACKEND = "python"
else:
    try:
        from threshreg._ccore import forward, inverse
        BACKEND = "cython"
    except ImportError:  # extension not built
        forward, inverse = _pycore.forward, _pycore.inverse
        BACKEND = "python"

__all__ = ["forward", "inverse", "BACKEND"]
