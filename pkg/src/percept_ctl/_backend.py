"""Kernel backend selection.

The compiled extension is used when it imports; ``PERCEPT_CTL_BACKEND=python``
forces the pure-Python kernels.
"""

import os

from . import _pykernels

python_kernels = _pykernels

try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and os.environ.get("PERCEPT_CTL_BACKEND", "").lower() != "python":
    kernels = compiled_kernels
    BACKEND = "cython"
else:
    kernels = python_kernels
    BACKEND = "python"
