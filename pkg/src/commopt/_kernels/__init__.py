"""Hot-loop kernels: compiled extension when available, NumPy reference otherwise.

Set COMMOPT_PURE=1 to force the reference implementation (used by the
benchmark and the bit-equivalence tests).
"""

from __future__ import annotations

import os

from . import reference
from .reference import pairwise_sum

if os.environ.get("COMMOPT_PURE"):
    _impl = reference
else:
    try:
        from . import _fastkern as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = reference

USING_EXTENSION: bool = bool(getattr(_impl, "IS_COMPILED", False))

msc_topk = _impl.msc_topk
msc_randk = _impl.msc_randk
msc_urandk = _impl.msc_urandk

__all__ = [
    "USING_EXTENSION",
    "msc_topk",
    "msc_randk",
    "msc_urandk",
    "pairwise_sum",
]
