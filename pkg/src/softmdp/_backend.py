"""Pick the kernel implementation once, at import time.

The compiled extension is used when it was built; ``SOFTMDP_BACKEND=python``
forces the numpy fallback (handy for benchmarking and cross-checks).
"""

import os

from . import _pykernels

pure = _pykernels

if os.environ.get("SOFTMDP_BACKEND", "").lower() == "python":
    compiled = None
    kernels = _pykernels
else:
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None
        kernels = _pykernels
    else:
        kernels = compiled

BACKEND = kernels.BACKEND
