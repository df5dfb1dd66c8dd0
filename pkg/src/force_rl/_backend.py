"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Setting ``FORCE_RL_BACKEND=python`` forces the fallback.
"""

import os

from force_rl import _pykernels

python_kernels = _pykernels

try:
    from force_rl import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

if compiled_kernels is not None and os.environ.get("FORCE_RL_BACKEND", "").lower() != "python":
    kernels = compiled_kernels
    BACKEND = "compiled"
else:
    kernels = _pykernels
    BACKEND = "python"
