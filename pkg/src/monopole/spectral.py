"""Periodic grid, Fourier multipliers, and the exact wave propagator.

Fields live on a square torus of side L sampled at N x N points (N a power of
two) and take values in n x n complex matrices, stored as arrays of shape
(N, N, n, n) with the grid axes first.  The discrete frequency lattice is
xi in (2*pi/L) * {-N/2, ..., N/2-1}^2 in numpy's fftfreq layout, and the
continuum convention is d_j <-> i*xi_j.

Operator symbols used throughout:

    partial_derivative   i*xi_j
    riesz                i*xi_j/|xi|      (zero mode -> 0)
    unit_riesz           xi_j/|xi|        (zero mode -> 0; riesz divided by i)
    inverse_laplacian    -1/|xi|^2        (zero mode -> 0, mean-zero input only)
    lambda_power(s)      (1+|xi|^2)^(s/2)
    d_power(s)           |xi|^s           (zero mode -> 0)

The wave propagator is exact per mode for the d'Alembertian -dt^2 + lap:
cos(|xi|t) and sin(|xi|t)/|xi| on mode xi, with the zero mode advancing
linearly.  duhamel_step adds a source integrated exactly against the
linear-in-time model through its two samples (start and midpoint), which keeps
the integrator second order and makes constant sources exact.
"""

from dataclasses import dataclass, field

import numpy as np

try:  # scipy's pocketfft wrapper is ~2x faster on matrix-valued stacks
    from scipy import fft as _fftlib
except ImportError:  # pragma: no cover - numpy-only environments
    _fftlib = np.fft

from .errors import MeanValueError
from .kernels import frob_grid


class TorusGrid:
    """Square periodic grid with cached frequency arrays.

    Parameters
    ----------
    n_points : int
        Points per axis; a power of two, at least 8.
    length : float
        Side length L of the torus.
    rank : int
        Matrix rank n of the field values (su(n)); default 2.
    """

    def __init__(self, n_points, length, rank=2):
        n_points = int(n_points)
        if n_points < 8 or (n_points & (n_points - 1)) != 0:
            raise ValueError("n_points must be a power of two >= 8")
        if not (length > 0):
            raise ValueError("length must be positive")
        self.N = n_points
        self.L = float(length)
        self.n = int(rank)
        self.dx = self.L / self.N
        k = 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)
        self.kx = k[:, None]
        self.ky = k[None, :]
        self.kabs = np.hypot(self.kx, self.ky)
        self.k2 = self.kx**2 + self.ky**2
        self._kabs_safe = np.where(self.kabs == 0.0, 1.0, self.kabs)
        self.nonzero = self.kabs > 0.0
        # 2/3-rule mask on mode indices: keep |m| <= N/3 per axis
        m = np.fft.fftfreq(self.N) * self.N
        keep = np.abs(m) <= self.N / 3.0
        self.dealias_mask = keep[:, None] & keep[None, :]
        x = np.arange(self.N) * self.dx
        self.x1 = x[:, None]
        self.x2 = x[None, :]

    def __repr__(self):
        return f"TorusGrid(N={self.N}, L={self.L:g}, n={self.n})"

    def compatible(self, w):
        return w.shape[:2] == (self.N, self.N)

    # -- transforms ---------------------------------------------------------

    def fft(self, w):
        return _fftlib.fft2(w, axes=(0, 1))

    def ifft(self, wh):
        return _fftlib.ifft2(wh, axes=(0, 1))

    def apply_symbol(self, w, symbol):
        """Multiply by a (N, N) frequency symbol; broadcasts over matrix axes."""
        wh = self.fft(w)
        if w.ndim > 2:
            wh *= symbol[(...,) + (None,) * (w.ndim - 2)]
        else:
            wh *= symbol
        return self.ifft(wh)

    # -- first-class multipliers --------------------------------------------

    def partial_derivative(self, w, j):
        """d_j w via the symbol i*xi_j (j in {1, 2})."""
        if j not in (1, 2):
            raise ValueError("axis j must be 1 or 2")
        k = self.kx if j == 1 else self.ky
        return self.apply_symbol(w, 1.0j * np.broadcast_to(k, (self.N, self.N)))

    def riesz(self, w, j):
        """Riesz transform, symbol i*xi_j/|xi|; the zero mode maps to 0."""
        if j not in (1, 2):
            raise ValueError("axis j must be 1 or 2")
        k = self.kx if j == 1 else self.ky
        sym = 1.0j * k / self._kabs_safe * self.nonzero
        return self.apply_symbol(w, np.broadcast_to(sym, (self.N, self.N)))

    def unit_riesz(self, w, j):
        """Unit-direction transform, symbol xi_j/|xi| (riesz divided by i).

        This is the operator the reduced evolution system composes in its data
        map, reconstruction, and bracket combinations; the conventions test
        locks the choice.  Zero mode -> 0.
        """
        if j not in (1, 2):
            raise ValueError("axis j must be 1 or 2")
        k = self.kx if j == 1 else self.ky
        sym = k / self._kabs_safe * self.nonzero
        return self.apply_symbol(w, np.broadcast_to(sym, (self.N, self.N)))

    def inverse_laplacian(self, w, tol=1e-10):
        """Solve lap(out) = w for mean-zero w; symbol -1/|xi|^2, zero mode -> 0.

        Raises MeanValueError if the input mean exceeds tol relative to the
        field scale.
        """
        wh = self.fft(w)
        mean = np.abs(wh[0, 0]) / self.N**2
        scale = max(float(np.max(np.abs(w))), 1e-300)
        if float(np.max(mean)) > tol * scale:
            raise MeanValueError(
                f"inverse_laplacian needs mean-zero input (relative mean "
                f"{float(np.max(mean)) / scale:.3e} > {tol:g})"
            )
        sym = np.where(self.nonzero, -1.0 / self.k2.clip(min=1e-300), 0.0)
        if w.ndim > 2:
            wh *= sym[(...,) + (None,) * (w.ndim - 2)]
        else:
            wh *= sym
        return self.ifft(wh)

    def lambda_power(self, w, s):
        """Inhomogeneous Bessel multiplier (1+|xi|^2)^(s/2)."""
        return self.apply_symbol(w, (1.0 + self.k2) ** (s / 2.0))

    def d_power(self, w, s):
        """Homogeneous multiplier |xi|^s; the zero mode is annihilated."""
        sym = np.where(self.nonzero, self._kabs_safe**s, 0.0)
        return self.apply_symbol(w, sym)

    def dealias(self, w):
        """Zero every mode outside the 2/3 ball (alias control for products)."""
        wh = self.fft(w)
        if w.ndim > 2:
            wh *= self.dealias_mask[(...,) + (None,) * (w.ndim - 2)]
        else:
            wh *= self.dealias_mask
        return self.ifft(wh)

    # -- norms ---------------------------------------------------------------

    def l2_norm(self, w):
        """L2 norm with the dx^2 measure; Frobenius over matrix axes."""
        return float(self.dx * np.sqrt(np.sum(np.abs(w) ** 2)))

    def l2_norm_fourier(self, wh):
        """Same norm evaluated from fft coefficients (Parseval)."""
        return float(self.dx / self.N * np.sqrt(np.sum(np.abs(wh) ** 2)))

    def linf_norm(self, w):
        """Max over grid points of the pointwise Frobenius norm."""
        if w.ndim > 2:
            return float(np.max(frob_grid(w)))
        return float(np.max(np.abs(w)))

    def mean(self, w):
        return np.mean(w, axis=(0, 1))

    def sobolev_norm(self, w, s, homogeneous=False):
        """H^s (or homogeneous variant) norm via frequency weights.

        The homogeneous variant with s < 0 requires mean-zero input.
        """
        wh = self.fft(w)
        if homogeneous:
            if s < 0:
                mean = float(np.max(np.abs(wh[0, 0]))) / self.N**2
                scale = max(float(np.max(np.abs(w))), 1e-300)
                if mean > 1e-10 * scale:
                    raise MeanValueError(
                        "negative-order homogeneous norm needs mean-zero input"
                    )
            weight = np.where(self.nonzero, self._kabs_safe**s, 0.0)
        else:
            weight = (1.0 + self.k2) ** (s / 2.0)
        if wh.ndim > 2:
            wh = wh * weight[(...,) + (None,) * (wh.ndim - 2)]
        else:
            wh = wh * weight
        return self.l2_norm_fourier(wh)


@dataclass
class Multiplier:
    """A frequency multiplier: precomputed (N, N) symbol plus zero-mode policy.

    zero_mode is one of "zero", "identity", or a complex value; it overrides
    the symbol at xi = 0.
    """

    name: str
    symbol: np.ndarray
    zero_mode: object = "zero"
    _resolved: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        sym = np.array(self.symbol, dtype=complex)
        if self.zero_mode == "zero":
            sym[0, 0] = 0.0
        elif self.zero_mode == "identity":
            sym[0, 0] = 1.0
        else:
            sym[0, 0] = complex(self.zero_mode)
        self._resolved = sym

    @classmethod
    def from_function(cls, grid, fn, name="multiplier", zero_mode="zero"):
        """Build from a callable fn(kx, ky) evaluated on the frequency lattice."""
        kx = np.broadcast_to(grid.kx, (grid.N, grid.N))
        ky = np.broadcast_to(grid.ky, (grid.N, grid.N))
        with np.errstate(divide="ignore", invalid="ignore"):
            sym = np.asarray(fn(kx, ky), dtype=complex)
        sym = np.where(np.isfinite(sym), sym, 0.0)
        return cls(name=name, symbol=sym, zero_mode=zero_mode)


def apply_multiplier(grid, w, mult):
    """Apply a Multiplier to a field on the grid."""
    return grid.apply_symbol(w, mult._resolved)


# -- wave propagation ---------------------------------------------------------


def _sinc_ratio(grid, t):
    """sin(|xi| t)/|xi| with the zero-mode limit t."""
    return np.where(grid.nonzero, np.sin(grid.kabs * t) / grid._kabs_safe, t)


def _bc(grid, sym, ndim):
    """Broadcast a (N, N) symbol against trailing matrix axes."""
    return sym[(...,) + (None,) * (ndim - 2)] if ndim > 2 else sym


def wave_propagate(grid, u, ut, t):
    """Exact free-wave flow of (-dt^2 + lap) u = 0 by time t.

    Per mode: u -> cos(|xi|t) u + sin(|xi|t)/|xi| ut, with the zero mode
    advancing as u + t*ut.  Conserves the discrete energy
    ||grad u||^2 + ||ut||^2 to rounding.
    """
    uh, uth = grid.fft(u), grid.fft(ut)
    c = np.cos(grid.kabs * t)
    s = _sinc_ratio(grid, t)
    ks = -grid.kabs * np.sin(grid.kabs * t)
    nd = u.ndim
    new_u = grid.ifft(_bc(grid, c, nd) * uh + _bc(grid, s, nd) * uth)
    new_ut = grid.ifft(_bc(grid, ks, nd) * uh + _bc(grid, c, nd) * uth)
    return new_u, new_ut


def _duhamel_moments(grid, dt):
    """Exact kernel moments for the sourced wave step.

    For w = |xi|: I0 = int K, I1 = int s*K with K(s) = sin(w(dt-s))/w, and
    J0 = int C, J1 = int s*C with C(s) = cos(w(dt-s)), all over s in [0, dt].
    Small-w values switch to series to avoid cancellation.
    """
    w = grid.kabs
    ws = grid._kabs_safe
    wt = w * dt
    cos_wt = np.cos(wt)
    sin_wt = np.sin(wt)
    with np.errstate(divide="ignore", invalid="ignore"):
        i0 = (1.0 - cos_wt) / ws**2
        i1 = dt * (1.0 - cos_wt) / ws**2 - (sin_wt - wt * cos_wt) / ws**3
        j0 = sin_wt / ws
        j1 = dt * sin_wt / ws - (cos_wt + wt * sin_wt - 1.0) / ws**2
    small = wt < 1e-4
    wt2 = wt**2
    i0 = np.where(small, dt**2 * (0.5 - wt2 / 24.0), i0)
    i1 = np.where(small, dt**3 * (1.0 / 6.0 - wt2 / 120.0), i1)
    j0 = np.where(small, dt * (1.0 - wt2 / 6.0), j0)
    j1 = np.where(small, dt**2 * (0.5 - wt2 / 24.0), j1)
    return i0, i1, j0, j1


def duhamel_step(grid, u, ut, b_start, b_mid, dt):
    """Advance (-dt^2 + lap) u = B by one step of size dt.

    b_start and b_mid are the source sampled at the step start and midpoint;
    the Duhamel integral is evaluated exactly for the linear-in-time source
    through those two samples (so a constant source gives the closed form
    -(1 - cos(|xi| dt))/|xi|^2 * B-hat exactly, and the step is second order
    for smooth sources).  With B = 0 this reduces to wave_propagate.
    """
    i0, i1, j0, j1 = _duhamel_moments(grid, dt)
    # linear model B(s) = B0 + (2s/dt)(Bm - B0); note box u = B forces the
    # oscillator form u'' + w^2 u = -B-hat, hence the overall minus
    wu0 = i0 - 2.0 * i1 / dt
    wum = 2.0 * i1 / dt
    wt0 = j0 - 2.0 * j1 / dt
    wtm = 2.0 * j1 / dt
    nd = u.ndim
    b0h, bmh = grid.fft(b_start), grid.fft(b_mid)
    new_u, new_ut = wave_propagate(grid, u, ut, dt)
    new_u = new_u - grid.ifft(_bc(grid, wu0, nd) * b0h + _bc(grid, wum, nd) * bmh)
    new_ut = new_ut - grid.ifft(_bc(grid, wt0, nd) * b0h + _bc(grid, wtm, nd) * bmh)
    return new_u, new_ut


def duhamel_half_predict(grid, u, ut, b_start, dt):
    """Half-step with the source frozen at its start value.

    Used to predict the midpoint state whose fields feed the midpoint source
    sample; first-order locally, which is enough to keep the full step second
    order.
    """
    half = 0.5 * dt
    w = grid.kabs
    ws = grid._kabs_safe
    with np.errstate(divide="ignore", invalid="ignore"):
        i0 = (1.0 - np.cos(w * half)) / ws**2
    i0 = np.where(w * half < 1e-4, half**2 * 0.5, i0)
    j0 = _sinc_ratio(grid, half)
    nd = u.ndim
    b0h = grid.fft(b_start)
    new_u, new_ut = wave_propagate(grid, u, ut, half)
    new_u = new_u - grid.ifft(_bc(grid, i0, nd) * b0h)
    new_ut = new_ut - grid.ifft(_bc(grid, j0, nd) * b0h)
    return new_u, new_ut


def resample(grid_src, grid_dst, w):
    """Re-express a grid field on a finer or coarser grid of the same torus.

    The spectrum is embedded (or truncated) symmetrically about mode zero,
    which is exact whenever the field's Fourier support fits strictly inside
    the smaller of the two Nyquist squares.  Both grids must share the same
    period.
    """
    if abs(grid_src.L - grid_dst.L) > 1e-12 * grid_dst.L:
        raise ValueError("grids cover different tori")
    ns, nd = grid_src.N, grid_dst.N
    if ns == nd:
        return np.array(w, copy=True)
    wh = np.fft.fftshift(np.fft.fft2(w, axes=(0, 1)), axes=(0, 1))
    if nd > ns:
        pad = (nd - ns) // 2
        widths = [(pad, nd - ns - pad), (pad, nd - ns - pad)]
        widths += [(0, 0)] * (w.ndim - 2)
        wh = np.pad(wh, widths)
    else:
        cut = (ns - nd) // 2
        wh = wh[cut:cut + nd, cut:cut + nd]
    wh = np.fft.ifftshift(wh, axes=(0, 1))
    out = np.fft.ifft2(wh, axes=(0, 1)) * (nd / ns) ** 2
    return out if np.iscomplexobj(w) else out.real
