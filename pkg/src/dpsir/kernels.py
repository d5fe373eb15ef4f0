"""Hot-kernel dispatch.

The compiled extension is used when it imported cleanly; otherwise the numpy
fallback is used. Set ``DPSIR_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("DPSIR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

bin_counts = _impl.bin_counts
slice_sums = _impl.slice_sums
fold_terms = _impl.fold_terms
peel_select = _impl.peel_select

__all__ = ["BACKEND", "bin_counts", "slice_sums", "fold_terms", "peel_select"]
