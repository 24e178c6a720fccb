"""Kernel backend selection.

The compiled extension is used when it imports; set ``IWAFLAT_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

if os.environ.get("IWAFLAT_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
gram_schmidt_nak = _impl.gram_schmidt_nak
flow_field = _impl.flow_field
dopri_advance = _impl.dopri_advance

__all__ = ["BACKEND", "gram_schmidt_nak", "flow_field", "dopri_advance"]
