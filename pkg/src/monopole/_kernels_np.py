"""Pure-numpy implementations of the pointwise matrix kernels.

Same call signatures as the compiled module; used as the fallback when the
extension is not built (or when MONOPOLE_PURE=1).
"""

import numpy as np


def bracket_grid(x, y):
    """Pointwise commutator over a grid of matrices: out = xy - yx."""
    return np.matmul(x, y) - np.matmul(y, x)


def mul_grid(x, y):
    """Pointwise matrix product."""
    return np.matmul(x, y)


def sandwich_grid(g, x):
    """Pointwise unitary conjugation g x g^H."""
    gh = np.conjugate(np.swapaxes(g, -1, -2))
    return np.matmul(np.matmul(g, x), gh)


def antiherm_grid(x):
    """Pointwise anti-Hermitian traceless projection.

    Returns (projected, discarded_max): discarded_max is the max abs entry of
    the removed component, used for tolerance checks.
    """
    xh = np.conjugate(np.swapaxes(x, -1, -2))
    ah = 0.5 * (x - xh)
    n = x.shape[-1]
    tr = np.trace(ah, axis1=-2, axis2=-1) / n
    ah = ah - tr[..., None, None] * np.eye(n)
    discarded = float(np.max(np.abs(x - ah))) if x.size else 0.0
    return ah, discarded


def frob_grid(x):
    """Pointwise Frobenius norm: collapses the trailing matrix axes."""
    return np.sqrt(np.sum(np.abs(x) ** 2, axis=(-2, -1)))
