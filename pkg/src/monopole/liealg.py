"""su(n) matrix algebra.

Fields in this package take values in su(n): anti-Hermitian traceless n x n
complex matrices (default n=2, basis i*sigma_k/2).  The auxiliary variables of
the reduced evolution system are complexified, so nothing here forces
anti-Hermiticity except the explicit projection helpers; physical fields are
validated at the API boundaries that require them.

All functions accept batched arrays: the matrix indices are the trailing two
axes, anything in front broadcasts.
"""

import numpy as np

PAULI = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=complex,
)


def dagger(x):
    """Conjugate transpose on the trailing matrix axes."""
    return np.conjugate(np.swapaxes(x, -1, -2))


def bracket(x, y):
    """Commutator [x, y] = xy - yx."""
    return x @ y - y @ x


def frobenius_norm(x):
    """Frobenius norm over the trailing matrix axes (batched: returns array)."""
    return np.sqrt(np.sum(np.abs(x) ** 2, axis=(-2, -1)))


def su2_basis():
    """Basis {i sigma_k / 2} of su(2); bracket closes with unit structure constants."""
    return 0.5j * PAULI


def sun_basis(n):
    """Generalized Gell-Mann basis of su(n), scaled to anti-Hermitian i*g/2.

    Returns an array of shape (n^2-1, n, n).  For n=2 this reduces to
    su2_basis().
    """
    if n < 2:
        raise ValueError("need n >= 2")
    gens = []
    for j in range(n):
        for k in range(j + 1, n):
            sym = np.zeros((n, n), complex)
            sym[j, k] = sym[k, j] = 1.0
            gens.append(sym)
            asym = np.zeros((n, n), complex)
            asym[j, k] = -1.0j
            asym[k, j] = 1.0j
            gens.append(asym)
    for d in range(1, n):
        diag = np.zeros((n, n), complex)
        for j in range(d):
            diag[j, j] = 1.0
        diag[d, d] = -d
        gens.append(diag * np.sqrt(2.0 / (d * (d + 1))))
    return 0.5j * np.array(gens)


def is_antihermitian(x, tol=1e-12):
    """True if x^H = -x up to tol (relative to the field scale)."""
    scale = max(float(np.max(np.abs(x))), 1.0)
    return float(np.max(np.abs(x + dagger(x)))) <= tol * scale


def is_traceless(x, tol=1e-12):
    scale = max(float(np.max(np.abs(x))), 1.0)
    tr = np.trace(x, axis1=-2, axis2=-1)
    return float(np.max(np.abs(tr))) <= tol * scale


def project_antihermitian(x):
    """Anti-Hermitian traceless part of x.

    Returns (projected, discarded) where discarded is the max-norm of the
    removed Hermitian + trace component, for tolerance reporting.
    """
    ah = 0.5 * (x - dagger(x))
    n = x.shape[-1]
    tr = np.trace(ah, axis1=-2, axis2=-1) / n
    ah = ah - tr[..., None, None] * np.eye(n)
    discarded = float(np.max(np.abs(x - ah)))
    return ah, discarded


def lie_exp(x):
    """Matrix exponential, batched.

    Anti-Hermitian input (the intended use) goes through a unitary
    eigendecomposition of the Hermitian generator, so the result is unitary
    with unit determinant to rounding.  Other inputs fall back to
    scaling-and-squaring on the Taylor series; no input is rejected.
    """
    x = np.asarray(x, dtype=complex)
    herm = -1.0j * x
    if np.max(np.abs(herm - dagger(herm))) <= 1e-12 * max(1.0, np.max(np.abs(x))):
        w, u = np.linalg.eigh(herm)
        phase = np.exp(1.0j * w)
        return (u * phase[..., None, :]) @ dagger(u)
    # general fallback: exp(x) = exp(x/2^k)^(2^k)
    norm = float(np.max(np.abs(x)))
    k = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0 else 0
    y = x / (2**k)
    n = x.shape[-1]
    term = np.broadcast_to(np.eye(n, dtype=complex), x.shape).copy()
    acc = term.copy()
    for j in range(1, 24):
        term = term @ y / j
        acc = acc + term
    for _ in range(k):
        acc = acc @ acc
    return acc


def random_su(n, rng, scale=1.0):
    """Random su(n) matrix: Gaussian entries, anti-Hermitian traceless part."""
    g = rng.normal(size=(n, n)) + 1.0j * rng.normal(size=(n, n))
    x, _ = project_antihermitian(g)
    return scale * x
