"""Kernel backend selection: compiled Cython extension when available,
NumPy fallback otherwise. Set CONESPECTRA_FORCE_FALLBACK=1 to skip the
extension.
"""

import os

if os.environ.get("CONESPECTRA_FORCE_FALLBACK") == "1":
    from . import kernels_py as kernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        from . import kernels_py as kernels
        BACKEND = "python"

bidiff_values = kernels.bidiff_values
third_kind_values = kernels.third_kind_values

__all__ = ["kernels", "bidiff_values", "third_kind_values", "BACKEND"]
