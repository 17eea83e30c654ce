"""Backend selection for the pointwise matrix kernels.

Tries the compiled extension first and falls back to numpy.  Set
MONOPOLE_PURE=1 to force the numpy path (useful for benchmarking and for
checking that both backends agree).
"""

import os

from . import _kernels_np

if os.environ.get("MONOPOLE_PURE", "").strip() in ("1", "true", "yes"):
    _impl = _kernels_np
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _kernels_np

bracket_grid = _impl.bracket_grid
mul_grid = _impl.mul_grid
sandwich_grid = _impl.sandwich_grid
antiherm_grid = _impl.antiherm_grid
frob_grid = _impl.frob_grid


def backend_name():
    return "compiled" if _impl.__name__.endswith("_ckernels") else "numpy"
