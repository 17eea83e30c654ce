"""Deterministic generators for matrix-valued test fields.

Everything here is seeded through a caller-provided numpy Generator, so
ensembles are reproducible: band-limited Gaussian fields, divergence-free
connection pairs built from a potential, near-cutoff shell data, and the
near-parallel wave-packet families used to probe null-form cancellation.
"""

import math

import numpy as np

from .liealg import sun_basis


def _mode_numbers(grid):
    return np.fft.fftfreq(grid.N) * grid.N


def point_symmetrize(w):
    """Project onto the sector even under point reflection (x, y) -> (-x, -y).

    Every operator in the reduced system (derivatives and direction
    transforms always appear in pairs inside the quadratic terms) preserves
    this sector, and the bracket fields whose spatial means form the torus
    harmonic obstruction become point-odd there, so their means vanish
    exactly.  Refinement studies on symmetric data therefore measure pure
    discretization error with no modeling floor.
    """
    flipped = w[::-1, ::-1]
    flipped = np.roll(np.roll(flipped, 1, axis=0), 1, axis=1)
    return 0.5 * (w + flipped)


def band_scalar(grid, rng, band, point_symmetric=False):
    """Real scalar field with Fourier support in |m_i| <= band, zero mean."""
    if band < 1 or band > grid.N // 2 - 1:
        raise ValueError(f"band must be in [1, N/2-1], got {band}")
    w = rng.standard_normal((grid.N, grid.N))
    wh = np.fft.fft2(w)
    m = _mode_numbers(grid)
    mask = (np.abs(m)[:, None] <= band) & (np.abs(m)[None, :] <= band)
    mask[0, 0] = False
    out = np.fft.ifft2(wh * mask).real
    return point_symmetrize(out) if point_symmetric else out


def shell_scalar(grid, rng, radius, width=1.5, point_symmetric=False):
    """Real scalar field supported on the ring ||m| - radius| <= width."""
    m = _mode_numbers(grid)
    mabs = np.hypot(m[:, None], m[None, :])
    mask = np.abs(mabs - radius) <= width
    mask[0, 0] = False
    if not mask.any():
        raise ValueError("empty frequency shell")
    w = rng.standard_normal((grid.N, grid.N))
    out = np.fft.ifft2(np.fft.fft2(w) * mask).real
    return point_symmetrize(out) if point_symmetric else out


def lie_field(grid, rng, band=4, amplitude=1.0, scalar=band_scalar, **kw):
    """Anti-Hermitian random field: scalar coefficients on a basis of su(n),
    normalized to the requested discrete L2 size."""
    basis = sun_basis(grid.n)
    w = np.zeros((grid.N, grid.N, grid.n, grid.n), dtype=complex)
    for t in basis:
        w += scalar(grid, rng, band, **kw)[..., None, None] * t
    size = grid.l2_norm(w)
    if size == 0.0:  # pragma: no cover - measure-zero draw
        raise ValueError("degenerate draw")
    return (amplitude / size) * w


def shell_lie_field(grid, rng, radius, width=1.5, amplitude=1.0,
                    point_symmetric=False):
    basis = sun_basis(grid.n)
    w = np.zeros((grid.N, grid.N, grid.n, grid.n), dtype=complex)
    for t in basis:
        s = shell_scalar(grid, rng, radius, width, point_symmetric)
        w += s[..., None, None] * t
    return (amplitude / grid.l2_norm(w)) * w


def coulomb_pair(grid, rng, band=4, amplitude=0.1, **kw):
    """Divergence-free connection pair (a1, a2) = (-d2 f0, d1 f0) from a
    random potential, scaled so hypot(||a1||, ||a2||) = amplitude.

    Returns (a1, a2, f0).  Extra keywords reach the scalar generator, e.g.
    scalar=shell_scalar with radius=..., or point_symmetric=True.
    """
    f0 = lie_field(grid, rng, band=band, amplitude=1.0, **kw)
    a1 = -grid.partial_derivative(f0, 2)
    a2 = grid.partial_derivative(f0, 1)
    size = math.hypot(grid.l2_norm(a1), grid.l2_norm(a2))
    c = amplitude / size
    return c * a1, c * a2, c * f0


def initial_data(grid, rng, band=4, amplitude=0.05, phi_amplitude=None, **kw):
    """Random admissible starting fields (a1, a2, phi0) at the given size."""
    a1, a2, _ = coulomb_pair(grid, rng, band=band, amplitude=amplitude, **kw)
    if phi_amplitude is None:
        phi_amplitude = amplitude
    phi0 = lie_field(grid, rng, band=band, amplitude=phi_amplitude, **kw)
    return a1, a2, phi0


def single_mode(grid, k, amplitude=1.0, generator=0, kind="sin"):
    """amplitude * sin/cos(k . x) on one su(n) generator."""
    t = sun_basis(grid.n)[generator]
    # x1 is a column, x2 a row; the sum broadcasts to the full grid
    phase = (2.0 * math.pi / grid.L) * (k[0] * grid.x1 + k[1] * grid.x2)
    prof = np.sin(phase) if kind == "sin" else np.cos(phase)
    return amplitude * prof[..., None, None] * t


# -- near-parallel wave packets ----------------------------------------------


def packet_wavevectors(freq, angle=None):
    """Integer wavevectors (k1, k2) at radius ~freq separated by ~angle.

    The default separation angle freq**-0.5 narrows as the frequency grows --
    the adversarial regime where null-form cancellation is strongest relative
    to a generic product.
    """
    if angle is None:
        angle = 1.0 / math.sqrt(freq)
    k1 = (int(round(freq)), 0)
    k2 = (int(round(freq * math.cos(angle))), int(round(freq * math.sin(angle))))
    if k2 == k1 or k2[1] == 0:
        k2 = (k2[0], 1)
    return k1, k2


def plane_packet(grid, k, envelope_kappa=0.0, center=(0.0, 0.0)):
    """Complex carrier e^{i k . x} with an optional periodic bump envelope.

    envelope_kappa=0 gives a pure plane wave; larger values concentrate the
    packet around `center` with frequency spread ~sqrt(kappa).
    """
    two_pi = 2.0 * math.pi / grid.L
    phase = two_pi * (k[0] * grid.x1 + k[1] * grid.x2)
    w = np.exp(1j * phase)
    if envelope_kappa > 0.0:
        cx = np.cos(two_pi * (grid.x1 - center[0])) - 1.0
        cy = np.cos(two_pi * (grid.x2 - center[1])) - 1.0
        w = w * np.exp(envelope_kappa * (cx + cy))
    return w


def packet_pair_potential(grid, freq, angle=None, envelope_kappa=0.0,
                          amplitude=1.0):
    """Two near-parallel packets mounted on the first two su(n) generators.

    Returns (f, p1, p2, (k1, k2)): f = p1 T1 + p2 T2 is the matrix potential
    whose gradient bracket collapses onto [T1, T2] with the scalar null form
    of (p1, p2) as coefficient.
    """
    basis = sun_basis(grid.n)
    if len(basis) < 2:
        raise ValueError("need at least two generators")
    k1, k2 = packet_wavevectors(freq, angle)
    p1 = plane_packet(grid, k1, envelope_kappa)
    p2 = plane_packet(grid, k2, envelope_kappa)
    f = p1[..., None, None] * basis[0] + p2[..., None, None] * basis[1]
    return (amplitude / grid.l2_norm(f)) * f, p1, p2, (k1, k2)


def half_wave_slices(grid, w0, times, sign=-1.0):
    """Analytic half-wave flow: each mode advances by e^{sign i |xi| t}."""
    wh = grid.fft(w0)
    shape = (grid.N, grid.N) + (1,) * (w0.ndim - 2)
    out = []
    for t in times:
        phase = np.exp(sign * 1j * grid.kabs * t).reshape(shape)
        out.append(grid.ifft(phase * wh))
    return out
