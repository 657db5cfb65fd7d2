"""Kernel backend selection: compiled extension when available, numpy
fallback otherwise. LLAMBERT_PURE_PYTHON=1 forces the fallback."""

import os

if os.environ.get("LLAMBERT_PURE_PYTHON", "") == "1":
    from . import _kernels_py as kernels

    KERNEL_BACKEND = "python"
else:
    try:
        from . import _kernels_c as kernels  # type: ignore[attr-defined]

        KERNEL_BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as kernels

        KERNEL_BACKEND = "python"
