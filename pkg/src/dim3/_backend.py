"""Select the label-sweep kernels: compiled extension first, pure Python otherwise.

Set ``DIM3_BACKEND=python`` to force the fallback.
"""
import os

from . import _pykernels

python_kernels = _pykernels

if os.environ.get("DIM3_BACKEND", "").lower() == "python":
    kernels = _pykernels
    compiled_kernels = None
else:
    try:
        from . import _kernels as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None
        kernels = _pykernels
    else:
        kernels = compiled_kernels

BACKEND = "cython" if kernels is not _pykernels else "python"
