"""Select the kernel implementation once, at import.

Set ``BIPCOMM_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

if os.environ.get("BIPCOMM_PURE_PYTHON"):
    from bipcomm import _pykernels as kernels

    BACKEND = "python"
else:
    try:
        from bipcomm import _ckernels as kernels

        BACKEND = "cython"
    except ImportError:
        from bipcomm import _pykernels as kernels

        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
