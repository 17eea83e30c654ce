"""Space-time norms, null-form diagnostics, estimate-ratio sampling, and the
parameter-admissibility calculator.

The continuum objects behind this module are bilinear space-time estimates in
wave-Sobolev norms.  On a periodic grid over a finite time slab we can only
evaluate a proxy: fields are sampled on M uniform time slices, multiplied by a
Hann window that vanishes at both endpoints, and transformed with a 2+1
dimensional FFT.  The modulation weight uses the comparable symbol
(1 + ||tau| - |xi||)^theta.  Ratio statistics produced here are therefore
indicative sanity evidence, never certificates; every report carries
`PROXY_NOTE` saying so.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .auxsystem import (
    assemble_Bpm,
    elliptic_solve_A0,
    nonlinearity_B,
    reconstruct,
)
from .kernels import bracket_grid, mul_grid
from .spectral import TorusGrid

PROXY_NOTE = (
    "norms are of the Hann-windowed extension on the sampled slab, a proxy "
    "for the finite-time restriction norm; ratios are indicative, not "
    "normative"
)

ESTIMATE_KINDS = ("A", "C", "D", "E", "M1", "M2", "M3", "M4", "ell", "bound")


def _pointwise(a, b):
    """Pointwise product; matrix product on the trailing pair of axes when
    the fields are matrix valued."""
    if a.ndim == 2:
        return a * b
    return mul_grid(np.ascontiguousarray(a), np.ascontiguousarray(b))


# -- space-time samples -------------------------------------------------------


@dataclass
class SpaceTimeSample:
    """Field values on M uniform time slices over a spatial grid.

    `values` has shape (M, N, N) or (M, N, N, n, n).  Norms taken from this
    sample window the time axis first (Hann, zero at both endpoints) unless
    `windowed` is already set, which is how products of windowed fields avoid
    being windowed twice.
    """

    grid: TorusGrid
    times: np.ndarray
    values: np.ndarray
    windowed: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        m = self.times.shape[0]
        if m < 8:
            raise ValueError(f"need at least 8 time slices, got {m}")
        if self.values.shape[0] != m:
            raise ValueError("values and times disagree on the slice count")
        if self.values.shape[1:3] != (self.grid.N, self.grid.N):
            raise ValueError("values do not live on the given grid")
        steps = np.diff(self.times)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("time slices must be uniformly spaced")

    @property
    def n_slices(self):
        return self.times.shape[0]

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    @property
    def window(self):
        return np.hanning(self.n_slices)

    def windowed_values(self):
        if self.windowed:
            return self.values
        w = self.window.reshape((-1,) + (1,) * (self.values.ndim - 1))
        return self.values * w

    def map_slices(self, fn, windowed=True):
        """Apply fn to each (windowed) time slice; result is marked windowed."""
        vals = self.windowed_values() if windowed else self.values
        out = np.stack([fn(vals[m]) for m in range(self.n_slices)])
        return SpaceTimeSample(self.grid, self.times, out, windowed=windowed)


def sample_from_arrays(grid, times, arrays, windowed=False):
    return SpaceTimeSample(grid, np.asarray(times, float),
                           np.stack([np.asarray(a) for a in arrays]),
                           windowed=windowed)


def trajectory_samples(
    grid,
    traj,
    elliptic_smallness=0.5,
    elliptic_tol=1e-10,
    reconstruct_tol=1e-6,
    with_sources=True,
):
    """Slice an evolution trajectory into SpaceTimeSamples.

    Returns a dict with the wave variables ("u", "v"), the reconstructed
    fields ("phi", "f", "df1", "df2"), the constraint solution ("a0"), and,
    when `with_sources`, the assembled wave sources ("bplus", "bminus").
    Products here are diagnostic, so no dealiasing is applied.
    """
    times = np.asarray(traj.times, float)
    out = {}
    out["u"] = sample_from_arrays(grid, times, [s.u for s in traj.states])
    out["v"] = sample_from_arrays(grid, times, [s.v for s in traj.states])
    phys = []
    guess = None
    for s in traj.states:
        ph = reconstruct(grid, s, tol=reconstruct_tol)
        ph.a0, _ = elliptic_solve_A0(
            grid, ph.df1, ph.df2, ph.phi, a0_guess=guess,
            smallness=elliptic_smallness, tol=elliptic_tol, dealias=False,
        )
        guess = ph.a0
        phys.append(ph)
    for name in ("phi", "f", "df1", "df2", "a0"):
        out[name] = sample_from_arrays(
            grid, times, [getattr(ph, name) for ph in phys]
        )
    if with_sources:
        bps, bms = [], []
        for s, ph in zip(traj.states, phys):
            b1 = nonlinearity_B(grid, 1, ph)
            b2 = nonlinearity_B(grid, 2, ph, aux=s)
            b3 = nonlinearity_B(grid, 3, ph)
            b4 = nonlinearity_B(grid, 4, ph)
            bp, bm = assemble_Bpm(b1, b2, b3, b4)
            bps.append(bp)
            bms.append(bm)
        out["bplus"] = sample_from_arrays(grid, times, bps)
        out["bminus"] = sample_from_arrays(grid, times, bms)
    return out


# -- norms --------------------------------------------------------------------


def sobolev_norm(grid, w, s, homogeneous=False):
    """L2 norm of the field weighted by (1+|xi|^2)^{s/2}, or |xi|^s when
    homogeneous.  Thin wrapper over the grid method so the analysis interface
    is self-contained."""
    return grid.sobolev_norm(w, s, homogeneous=homogeneous)


def _st_frequencies(sample):
    tau = 2.0 * math.pi * np.fft.fftfreq(sample.n_slices, d=sample.dt)
    return tau.reshape(-1, 1, 1), sample.grid.kabs[None, :, :]


def _st_fft(sample):
    return np.fft.fftn(sample.windowed_values(), axes=(0, 1, 2))


def _st_l2_constant(sample):
    m = sample.n_slices
    nsq = sample.grid.N**2
    return math.sqrt(sample.dt * sample.grid.dx**2 / (m * nsq))


def _weighted_st_norm(sample, weight):
    what = _st_fft(sample)
    w = weight.reshape(weight.shape + (1,) * (what.ndim - 3))
    return _st_l2_constant(sample) * float(np.linalg.norm(w * what))


def modulation_weight(tau, kabs, theta):
    """(1 + ||tau| - |xi||)^theta, the comparable form of the wave-distance
    weight."""
    return (1.0 + np.abs(np.abs(tau) - kabs)) ** theta


def wave_sobolev_norm(sample, s, theta, variant="H"):
    """Discrete wave-Sobolev norm of the windowed sample.

    variant="H": (1+|xi|^2)^{s/2} (1+||tau|-|xi||)^theta weight in the 2+1
    dimensional Fourier domain.  variant="calH" adds the norm of the time
    derivative measured at s-1 (multiplication by i tau).  variant="nplus"
    replaces the spatial weight by the full space-time elliptic weight
    (1+tau^2+|xi|^2)^{s/2} -- the same machinery under a different name; pass
    the full intended exponent as s.
    """
    tau, kabs = _st_frequencies(sample)
    mod = modulation_weight(tau, kabs, theta)
    if variant == "H":
        return _weighted_st_norm(sample, (1.0 + kabs**2) ** (s / 2.0) * mod)
    if variant == "calH":
        base = _weighted_st_norm(sample, (1.0 + kabs**2) ** (s / 2.0) * mod)
        dt_w = np.abs(tau) * (1.0 + kabs**2) ** ((s - 1.0) / 2.0) * mod
        return base + _weighted_st_norm(sample, dt_w)
    if variant == "nplus":
        return _weighted_st_norm(
            sample, (1.0 + tau**2 + kabs**2) ** (s / 2.0) * mod
        )
    raise ValueError(f"unknown variant {variant!r}")


def spacetime_filter(sample, plus_exponent, minus_exponent):
    """Apply (1+tau^2+|xi|^2)^{plus/2} (1+||tau|-|xi||)^{minus} to the
    windowed sample and return the filtered sample (already windowed)."""
    tau, kabs = _st_frequencies(sample)
    weight = (1.0 + tau**2 + kabs**2) ** (plus_exponent / 2.0)
    weight = weight * modulation_weight(tau, kabs, minus_exponent)
    what = _st_fft(sample)
    w = weight.reshape(weight.shape + (1,) * (what.ndim - 3))
    vals = np.fft.ifftn(w * what, axes=(0, 1, 2))
    return SpaceTimeSample(sample.grid, sample.times, vals, windowed=True)


def mixed_norm(sample, p, q):
    """L^p in time of the L^q spatial norm (Frobenius over matrix entries).

    p and q may be math.inf.  The sample is windowed first unless it already
    is; measures are dt and dx^2.
    """
    vals = sample.windowed_values()
    if vals.ndim == 5:
        g = np.sqrt(np.sum(np.abs(vals) ** 2, axis=(3, 4)))
    else:
        g = np.abs(vals)
    dx2 = sample.grid.dx**2
    if math.isinf(q):
        slice_norms = g.reshape(g.shape[0], -1).max(axis=1)
    else:
        slice_norms = (np.sum(g**q, axis=(1, 2)) * dx2) ** (1.0 / q)
    if math.isinf(p):
        return float(slice_norms.max())
    return float((np.sum(slice_norms**p) * sample.dt) ** (1.0 / p))


# -- null forms ---------------------------------------------------------------


def null_form_Q12(grid, f, g):
    """d1 f * d2 g - d2 f * d1 g (matrix product order preserved)."""
    return _pointwise(
        grid.partial_derivative(f, 1), grid.partial_derivative(g, 2)
    ) - _pointwise(grid.partial_derivative(f, 2), grid.partial_derivative(g, 1))


def null_form_Q(grid, phi, phit, psi, psit, j, variant="plus"):
    """Direction-weighted product of opposite half-wave factors.

    plus:  R_j[(dt+iD)phi] (dt-iD)psi + (dt+iD)phi R_j[(dt-iD)psi]
    minus: the same with the half-wave signs exchanged.
    R_j is the Riesz transform i xi_j/|xi| (zero spatial mode projected out).
    Time derivatives are supplied, spatial factors applied spectrally.
    """
    if variant == "plus":
        a = phit + 1j * grid.d_power(phi, 1.0)
        b = psit - 1j * grid.d_power(psi, 1.0)
    elif variant == "minus":
        a = phit - 1j * grid.d_power(phi, 1.0)
        b = psit + 1j * grid.d_power(psi, 1.0)
    else:
        raise ValueError(f"variant must be 'plus' or 'minus', got {variant!r}")
    return _pointwise(grid.riesz(a, j), b) + _pointwise(a, grid.riesz(b, j))


def symbol_q(tau, xi, lam, eta, j, variant="plus"):
    """Bilinear symbol of the null form above at one frequency pair.

    plus:  (xi_j/|xi| + eta_j/|eta|) (tau + |xi|) (lam - |eta|)
    minus: (xi_j/|xi| + eta_j/|eta|) (tau - |xi|) (lam + |eta|)

    xi and eta are spatial frequency 2-vectors and must be nonzero.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    nxi = float(np.hypot(xi[0], xi[1]))
    neta = float(np.hypot(eta[0], eta[1]))
    if nxi == 0.0 or neta == 0.0:
        raise ValueError("symbol undefined at zero spatial frequency")
    if j not in (1, 2):
        raise ValueError("j must be 1 or 2")
    direction = xi[j - 1] / nxi + eta[j - 1] / neta
    if variant == "plus":
        return direction * (tau + nxi) * (lam - neta)
    if variant == "minus":
        return direction * (tau - nxi) * (lam + neta)
    raise ValueError(f"variant must be 'plus' or 'minus', got {variant!r}")


def symbol_q_region(tau, xi, lam, eta):
    """True on the elliptic-dominated region |tau| >= 2|xi| or
    |lam| >= 2|eta|."""
    nxi = float(np.hypot(*np.asarray(xi, dtype=float)))
    neta = float(np.hypot(*np.asarray(eta, dtype=float)))
    return abs(tau) >= 2.0 * nxi or abs(lam) >= 2.0 * neta


def symbol_q_bound(tau, xi, lam, eta):
    """The elementary bound 2(|tau|+|xi|)(|lam|+|eta|) dominating |q|."""
    nxi = float(np.hypot(*np.asarray(xi, dtype=float)))
    neta = float(np.hypot(*np.asarray(eta, dtype=float)))
    return 2.0 * (abs(tau) + nxi) * (abs(lam) + neta)


# -- parameter windows --------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """An interval with independently open/closed endpoints."""

    lower: float
    upper: float
    lower_open: bool = True
    upper_open: bool = True

    @property
    def empty(self):
        if self.lower > self.upper:
            return True
        if self.lower == self.upper:
            return self.lower_open or self.upper_open
        return False

    def contains(self, x):
        if self.lower_open:
            if x <= self.lower:
                return False
        elif x < self.lower:
            return False
        if self.upper_open:
            if x >= self.upper:
                return False
        elif x > self.upper:
            return False
        return True

    def interior_points(self, k):
        """k points strictly inside the interval (empty -> error)."""
        if self.empty:
            raise ValueError("cannot sample an empty interval")
        t = np.arange(1, k + 1) / (k + 1.0)
        return self.lower + (self.upper - self.lower) * t

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    def to_dict(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "lower_open": self.lower_open,
            "upper_open": self.upper_open,
            "empty": self.empty,
        }

    def __str__(self):
        lb = "(" if self.lower_open else "["
        ub = ")" if self.upper_open else "]"
        if self.empty:
            return "empty"
        return f"{lb}{self.lower:.6g}, {self.upper:.6g}{ub}"


def _clamp(iv, lo, hi, lo_open=False, hi_open=False):
    """Intersect an Interval with [lo, hi] (openness per flags)."""
    lower, lopen = iv.lower, iv.lower_open
    upper, uopen = iv.upper, iv.upper_open
    if lo > lower or (lo == lower and lo_open and not lopen):
        lower, lopen = lo, lo_open
    if hi < upper or (hi == upper and hi_open and not uopen):
        upper, uopen = hi, hi_open
    return Interval(lower, upper, lopen, uopen)


def eps_window(s):
    """[0, min(2s - 1/2, 1/2)) -- empty at and below s = 1/4."""
    return Interval(0.0, min(2.0 * s - 0.5, 0.5), lower_open=False)


def theta_window(s, eps):
    """(3/4 - eps/2, s + 1/2 - eps] intersected with theta < 1 - eps."""
    lower = 0.75 - 0.5 * eps
    closed_upper = s + 0.5 - eps
    open_upper = 1.0 - eps
    if closed_upper < open_upper:
        return Interval(lower, closed_upper, upper_open=False)
    return Interval(lower, open_upper, upper_open=True)


def kt_conditions(sigma, p, q, s1, s2, tol=1e-12):
    """Check the product-estimate side conditions for given exponents.

    c1: 1/p <= (1 - 1/q)/2
    c2: 0 < sigma < 2(1 - 1/q - 1/p)
    c3: s1, s2 < 1 - 1/q - 1/(2p)
    c4: s1 + s2 + sigma = 2(1 - 1/q - 1/(2p))
    plus the exponent ranges 1 <= p <= inf, 1 <= q < inf.
    """
    ip = 0.0 if math.isinf(p) else 1.0 / p
    iq = 1.0 / q
    ranges = (p >= 1.0) and (q >= 1.0) and not math.isinf(q)
    level = 1.0 - iq - 0.5 * ip
    flags = {
        "ranges": bool(ranges),
        "c1": bool(ip <= 0.5 * (1.0 - iq) + tol),
        "c2": bool(0.0 < sigma < 2.0 * (1.0 - iq - ip)),
        "c3": bool(s1 < level and s2 < level),
        "c4": bool(abs(s1 + s2 + sigma - 2.0 * level) <= tol),
    }
    flags["ok"] = all(flags.values())
    return flags


def _elliptic_family(s, a, kind):
    """Reciprocal-exponent windows for one family of constraint estimates.

    kind "homogeneous": valid for a in [0, 1] (s > 0),
        max((1+2a-4s)/3, (1+a-4s)/2, min(a,1)/2) < 1/q < (1+a)/2,
        1 - 2/q + a - 2s <= 1/p <= (1 - 1/q)/2 and 1/p < 1 - 2/q + a.
    kind "subcritical" (a*q < 2): a in (0, min(2s, 1)),
        max(1/2 + a - 2s, a/2) < 1/q < 1/2,
        1 - 2/q + a - 2s <= 1/p < 1/2 - 1/q.
    kind "supercritical" (a*q > 2): s > 1/4, a in (0, min(4s-1, 1+s, 2s)),
        max((a-s)/2, 1/2 + a - 2s) < 1/q < min(a, 1)/2, same 1/p line.

    The 1/p window depends on 1/q; it is reported at the midpoint of the 1/q
    window (recorded as ref_inv_q).
    """
    if kind == "homogeneous":
        a_ok = 0.0 <= a <= 1.0
        inv_q = Interval(
            max((1.0 + 2.0 * a - 4.0 * s) / 3.0,
                (1.0 + a - 4.0 * s) / 2.0,
                min(a, 1.0) / 2.0),
            (1.0 + a) / 2.0,
        )
    elif kind == "subcritical":
        a_ok = 0.0 < a < min(2.0 * s, 1.0)
        inv_q = Interval(max(0.5 + a - 2.0 * s, a / 2.0), 0.5)
    elif kind == "supercritical":
        a_ok = s > 0.25 and 0.0 < a < min(4.0 * s - 1.0, 1.0 + s, 2.0 * s)
        inv_q = Interval(
            max((a - s) / 2.0, 0.5 + a - 2.0 * s), min(a, 1.0) / 2.0
        )
    else:  # pragma: no cover - internal
        raise ValueError(kind)
    inv_q = _clamp(inv_q, 0.0, 1.0, lo_open=True, hi_open=False)
    fam = {"kind": kind, "a": a, "a_admissible": bool(a_ok), "inv_q": inv_q}
    if a_ok and not inv_q.empty:
        rq = inv_q.midpoint
        lower = 1.0 - 2.0 * rq + a - 2.0 * s
        if kind == "homogeneous":
            inv_p = Interval(lower, 0.5 * (1.0 - rq),
                             lower_open=False, upper_open=False)
            cap = 1.0 - 2.0 * rq + a
            inv_p = _clamp(inv_p, 0.0, cap, lo_open=False, hi_open=True)
        else:
            inv_p = Interval(lower, 0.5 - rq, lower_open=False)
            inv_p = _clamp(inv_p, 0.0, 1.0, lo_open=False, hi_open=False)
        fam["ref_inv_q"] = rq
        fam["inv_p"] = inv_p
        fam["empty"] = inv_p.empty
    else:
        fam["ref_inv_q"] = None
        fam["inv_p"] = Interval(1.0, 0.0)
        fam["empty"] = True
    return fam


@dataclass
class ParamWindow:
    """Every admissible-exponent window of the wellposedness scheme at one
    regularity s (and one constraint weight a)."""

    s: float
    a: float
    eps: Interval
    theta: Interval
    eps_reference: float
    inv_ptilde: Interval
    inv_q: Interval
    inv_p: Interval
    elliptic: dict
    kt: Optional[dict] = None
    emptiness: dict = field(default_factory=dict)

    def theta_at(self, eps):
        return theta_window(self.s, eps)

    def to_dict(self):
        def enc(v):
            if isinstance(v, Interval):
                return v.to_dict()
            if isinstance(v, dict):
                return {k: enc(x) for k, x in v.items()}
            return v

        return {
            "s": self.s,
            "a": self.a,
            "eps": self.eps.to_dict(),
            "theta": self.theta.to_dict(),
            "eps_reference": self.eps_reference,
            "inv_ptilde": self.inv_ptilde.to_dict(),
            "inv_q": self.inv_q.to_dict(),
            "inv_p": self.inv_p.to_dict(),
            "elliptic": enc(self.elliptic),
            "kt": self.kt,
            "emptiness": dict(self.emptiness),
        }


def default_constraint_weight(s):
    """Reference smoothing weight for the constraint estimates: half the cap
    of the strongest family when s > 1/4, otherwise half the subcritical cap."""
    if s > 0.25:
        return 0.5 * min(4.0 * s - 1.0, 1.0)
    return 0.5 * min(2.0 * s, 1.0)


def admissible_params(s, a=None, kt=None):
    """Evaluate every exponent window of the scheme at regularity s.

    Windows with lower >= upper are returned empty (emptiness is data, not an
    error).  `a` defaults to `default_constraint_weight(s)`.  When `kt` is
    given as (sigma, p, q, s1, s2), the product-estimate side conditions are
    checked and reported as flags.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if a is None:
        a = default_constraint_weight(s)
    eps = eps_window(s)
    eps_ref = 0.0  # smallest admissible eps; it widens the theta window
    theta = theta_window(s, eps_ref)
    inv_ptilde = Interval(1.0 - 2.0 * s, 0.5)
    inv_ptilde = _clamp(inv_ptilde, 0.0, 1.0, lo_open=False, hi_open=False)
    inv_q = Interval(max((1.0 - 2.0 * s) / 3.0, s / 2.0), 2.0 * s / 3.0)
    inv_q = _clamp(inv_q, 0.0, 1.0, lo_open=True, hi_open=False)
    if inv_q.empty:
        inv_p = Interval(1.0, 0.0)
    else:
        # 2/p = 1 - 1/q maps the open q-window to an open p-window
        inv_p = Interval(0.5 * (1.0 - inv_q.upper), 0.5 * (1.0 - inv_q.lower))
    elliptic = {
        kind: _elliptic_family(s, a, kind)
        for kind in ("homogeneous", "subcritical", "supercritical")
    }
    kt_flags = None
    if kt is not None:
        kt_flags = kt_conditions(*kt)
    window = ParamWindow(
        s=s,
        a=a,
        eps=eps,
        theta=theta,
        eps_reference=eps_ref,
        inv_ptilde=inv_ptilde,
        inv_q=inv_q,
        inv_p=inv_p,
        elliptic=elliptic,
        kt=kt_flags,
    )
    window.emptiness = {
        "eps": eps.empty,
        "theta": theta.empty,
        "inv_ptilde": inv_ptilde.empty,
        "inv_q": inv_q.empty,
        "inv_p": inv_p.empty,
        "wave_scheme": eps.empty or theta.empty,
        "elliptic_homogeneous": elliptic["homogeneous"]["empty"],
        "elliptic_subcritical": elliptic["subcritical"]["empty"],
        "elliptic_supercritical": elliptic["supercritical"]["empty"],
    }
    return window


# -- estimate-ratio sampling --------------------------------------------------


@dataclass
class RatioStats:
    kind: str
    count: int
    max_ratio: float
    mean_ratio: float
    ratios: tuple
    params: dict
    note: str = PROXY_NOTE

    def to_dict(self):
        return {
            "kind": self.kind,
            "count": self.count,
            "max_ratio": self.max_ratio,
            "mean_ratio": self.mean_ratio,
            "ratios": list(self.ratios),
            "params": {k: v for k, v in self.params.items()},
            "note": self.note,
        }


def _require(cond, msg):
    if not cond:
        raise ValueError(msg)


def _rhs_guard(rhs):
    if rhs <= 1e-300:
        raise ValueError("degenerate input: the estimate denominator is zero")
    return rhs


def _check_wave_params(s, theta, eps):
    _require(s is not None and theta is not None, "kind needs s and theta")
    e = 0.0 if eps is None else eps
    ew = eps_window(s)
    _require(not ew.empty and ew.contains(e),
             f"eps={e:g} outside the admissible window {ew} at s={s:g}")
    tw = theta_window(s, e)
    _require(tw.contains(theta),
             f"theta={theta:g} outside the admissible window {tw} "
             f"at (s={s:g}, eps={e:g})")
    return e


def estimate_ratio(kind, inputs, check_admissible=True, threads=None, **params):
    """Left/right ratio of one named inequality over an ensemble of samples.

    kind selects the inequality; `inputs` is a list whose entries are the
    per-sample input tuples (a bare tuple or sample is promoted to a
    one-element ensemble):

    - "A":  (u, v); params sigma, p, q, s1, s2 (s2 defaults to s1), theta.
            ||D^-sigma (u v)||_{L^p L^q} vs ||u||_{H^{s1,theta}}
            ||v||_{H^{s2,theta}}.
    - "C":  (u,); params p, theta.  ||u||_{L^p L^2} vs ||u||_{H^{0,theta}}.
    - "D":  (u,); params p, q, theta.  ||u||_{L^p L^q} vs the H norm at the
            scaling exponent 1 - 2/q - 1/p.
    - "E":  (u, v); params a, b, alpha, beta.  ||uv||_{L^2} vs the product of
            H^{a,alpha} and H^{b,beta} norms.
    - "M1": (f,); params s, theta, eps.  Null-form bracket of the gradient
            measured at (s, theta-1+eps) vs ||grad f||^2 at (s, theta).
    - "M2": (a0, phi); product a0 phi, same norms as M1's pattern.
    - "M3": (df, phi); bracket [df, phi], same pattern.
    - "M4": (a0, df); product a0 df, same pattern.
    - "ell": (df1, df2, phi); constraint solution measured at (s, theta) vs
            ||grad f|| ||phi||.
    - "bound": (u, v, bplus, bminus); the sources filtered by the inverse
            space-time weight at (-1, -1+eps), measured in the two-norm
            variant at (s+1, theta), vs the same norm of u and v.

    Inequality side conditions are enforced up front (ValueError) unless
    check_admissible=False.  Zero denominators raise.  The ensemble is mapped
    over a thread pool (MONOPOLE_THREADS caps it) with order-stable
    aggregation; returns RatioStats with max and mean ratios.
    """
    if kind not in ESTIMATE_KINDS:
        raise ValueError(f"unknown estimate kind {kind!r}")
    if isinstance(inputs, SpaceTimeSample):
        inputs = [(inputs,)]
    elif isinstance(inputs, tuple):
        inputs = [inputs]
    inputs = [(t,) if isinstance(t, SpaceTimeSample) else tuple(t)
              for t in inputs]
    _require(len(inputs) > 0, "empty ensemble")

    s = params.get("s")
    theta = params.get("theta")
    eps = params.get("eps", 0.0)
    p = params.get("p")
    q = params.get("q")

    if check_admissible:
        if kind in ("M1", "M2", "M3", "M4", "bound"):
            eps = _check_wave_params(s, theta, eps)
        elif kind == "ell":
            _check_wave_params(s, theta, 0.0)
        elif kind == "C":
            _require(p is not None and p >= 2.0, "C needs p >= 2")
            _require(theta is not None and theta > 0.5, "C needs theta > 1/2")
        elif kind == "D":
            _require(p is not None and p >= 2.0, "D needs p >= 2")
            _require(q is not None and 2.0 <= q and not math.isinf(q),
                     "D needs 2 <= q < inf")
            ip = 0.0 if math.isinf(p) else 1.0 / p
            _require(2.0 * ip <= 0.5 - 1.0 / q + 1e-12,
                     "D needs 2/p <= 1/2 - 1/q")
            _require(theta is not None and theta > 0.5, "D needs theta > 1/2")
        elif kind == "E":
            a, b = params.get("a"), params.get("b")
            al, be = params.get("alpha"), params.get("beta")
            _require(None not in (a, b, al, be), "E needs a, b, alpha, beta")
            _require(min(a, b, al, be) >= 0.0, "E needs nonnegative exponents")
            _require(a + b > 1.0, "E needs a + b > 1")
            _require(al + be > 0.5, "E needs alpha + beta > 1/2")
        elif kind == "A":
            sig = params.get("sigma")
            s1 = params.get("s1")
            s2 = params.get("s2", s1)
            _require(None not in (sig, p, q, s1), "A needs sigma, p, q, s1")
            flags = kt_conditions(sig, p, q, s1, s2)
            _require(flags["ok"], f"product-estimate side conditions fail: "
                     f"{ {k: v for k, v in flags.items() if not v} }")
            _require(theta is not None and theta > 0.5, "A needs theta > 1/2")

    def one(tup):
        return _RATIO_FNS[kind](tup, params)

    env = os.environ.get("MONOPOLE_THREADS")
    if threads is None:
        threads = int(env) if env else min(4, len(inputs))
    threads = max(1, min(threads, len(inputs)))
    if threads == 1 or len(inputs) == 1:
        ratios = [one(t) for t in inputs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            ratios = list(pool.map(one, inputs))
    ratios = tuple(float(r) for r in ratios)
    return RatioStats(
        kind=kind,
        count=len(ratios),
        max_ratio=max(ratios),
        mean_ratio=sum(ratios) / len(ratios),
        ratios=ratios,
        params={k: v for k, v in params.items()},
    )


def _product_sample(x, y):
    xv, yv = x.windowed_values(), y.windowed_values()
    vals = np.stack([_pointwise(xv[m], yv[m]) for m in range(x.n_slices)])
    return SpaceTimeSample(x.grid, x.times, vals, windowed=True)


def _bracket_sample(x, y):
    xv, yv = x.windowed_values(), y.windowed_values()
    vals = np.stack(
        [bracket_grid(np.ascontiguousarray(xv[m]), np.ascontiguousarray(yv[m]))
         for m in range(x.n_slices)]
    )
    return SpaceTimeSample(x.grid, x.times, vals, windowed=True)


def _ratio_A(tup, P):
    u, v = tup
    prod = _product_sample(u, v)
    smoothed = prod.map_slices(
        lambda w: u.grid.d_power(w, -P["sigma"]), windowed=True
    )
    lhs = mixed_norm(smoothed, P["p"], P["q"])
    s1 = P["s1"]
    s2 = P.get("s2", s1)
    rhs = _rhs_guard(
        wave_sobolev_norm(u, s1, P["theta"])
        * wave_sobolev_norm(v, s2, P["theta"])
    )
    return lhs / rhs


def _ratio_C(tup, P):
    (u,) = tup
    lhs = mixed_norm(u, P["p"], 2.0)
    rhs = _rhs_guard(wave_sobolev_norm(u, 0.0, P["theta"]))
    return lhs / rhs


def _ratio_D(tup, P):
    (u,) = tup
    ip = 0.0 if math.isinf(P["p"]) else 1.0 / P["p"]
    s_embed = 1.0 - 2.0 / P["q"] - ip
    lhs = mixed_norm(u, P["p"], P["q"])
    rhs = _rhs_guard(wave_sobolev_norm(u, s_embed, P["theta"]))
    return lhs / rhs


def _ratio_E(tup, P):
    u, v = tup
    lhs = mixed_norm(_product_sample(u, v), 2.0, 2.0)
    rhs = _rhs_guard(
        wave_sobolev_norm(u, P["a"], P["alpha"])
        * wave_sobolev_norm(v, P["b"], P["beta"])
    )
    return lhs / rhs


def _grad_samples(f):
    g = f.grid
    df1 = f.map_slices(lambda w: g.partial_derivative(w, 1))
    df2 = f.map_slices(lambda w: g.partial_derivative(w, 2))
    return df1, df2


def _ratio_M1(tup, P):
    (f,) = tup
    df1, df2 = _grad_samples(f)
    quad = _bracket_sample(df1, df2)
    s, theta, eps = P["s"], P["theta"], P.get("eps", 0.0)
    lhs = wave_sobolev_norm(quad, s, theta - 1.0 + eps)
    grad = math.hypot(
        wave_sobolev_norm(df1, s, theta), wave_sobolev_norm(df2, s, theta)
    )
    return lhs / _rhs_guard(grad**2)


def _ratio_bilinear(tup, P, combine):
    x, y = tup
    s, theta, eps = P["s"], P["theta"], P.get("eps", 0.0)
    lhs = wave_sobolev_norm(combine(x, y), s, theta - 1.0 + eps)
    rhs = _rhs_guard(
        wave_sobolev_norm(x, s, theta) * wave_sobolev_norm(y, s, theta)
    )
    return lhs / rhs


def _ratio_M2(tup, P):
    return _ratio_bilinear(tup, P, _product_sample)


def _ratio_M3(tup, P):
    return _ratio_bilinear(tup, P, _bracket_sample)


def _ratio_M4(tup, P):
    return _ratio_bilinear(tup, P, _product_sample)


def _ratio_ell(tup, P):
    df1, df2, phi = tup
    g = df1.grid
    s, theta = P["s"], P["theta"]
    d1w, d2w, pw = (x.windowed_values() for x in (df1, df2, phi))
    slices = []
    guess = None
    for m in range(df1.n_slices):
        a0, _ = elliptic_solve_A0(
            g, d1w[m], d2w[m], pw[m], a0_guess=guess,
            smallness=P.get("smallness", 0.5),
            tol=P.get("elliptic_tol", 1e-10),
        )
        guess = a0
        slices.append(a0)
    a0s = SpaceTimeSample(g, df1.times, np.stack(slices), windowed=True)
    lhs = wave_sobolev_norm(a0s, s, theta)
    grad = math.hypot(
        wave_sobolev_norm(df1, s, theta), wave_sobolev_norm(df2, s, theta)
    )
    rhs = _rhs_guard(grad * wave_sobolev_norm(phi, s, theta))
    return lhs / rhs


def _ratio_bound(tup, P):
    u, v, bplus, bminus = tup
    s, theta, eps = P["s"], P["theta"], P.get("eps", 0.0)
    lhs = max(
        wave_sobolev_norm(
            spacetime_filter(b, -1.0, -1.0 + eps), s + 1.0, theta, "calH"
        )
        for b in (bplus, bminus)
    )
    rhs = _rhs_guard(
        wave_sobolev_norm(u, s + 1.0, theta, "calH")
        + wave_sobolev_norm(v, s + 1.0, theta, "calH")
    )
    return lhs / rhs


_RATIO_FNS = {
    "A": _ratio_A,
    "C": _ratio_C,
    "D": _ratio_D,
    "E": _ratio_E,
    "M1": _ratio_M1,
    "M2": _ratio_M2,
    "M3": _ratio_M3,
    "M4": _ratio_M4,
    "ell": _ratio_ell,
    "bound": _ratio_bound,
}


# -- scaling symmetry ---------------------------------------------------------


def scaling_residual(grid, traj, lam, **report_kwargs):
    """First-order residuals of the rescaled solution lam * field(lam t,
    lam x) against the originals.

    The rescaled solution lives on the paired grid (same point count, side
    length L/lam), where the original sample arrays reappear verbatim: u and v
    carry over unchanged, their time derivatives pick up one factor of lam,
    and times shrink by lam.  The first-order residual fields are homogeneous
    of degree two in the scaling, so their norms scale by exactly lam and the
    `ratio` entries (rescaled / (lam * original)) sit at 1 up to rounding for
    self-consistent trajectories.  The once-integrated identity
    (curl_identity) is homogeneous of degree one: its ratio sits at 1/lam,
    which is still within the lam-factor band a matched-resolution comparison
    allows.
    """
    from .auxsystem import AuxState, Trajectory, consistency_report

    if lam <= 0:
        raise ValueError("lam must be positive")
    scaled_grid = TorusGrid(grid.N, grid.L / lam, rank=grid.n)
    scaled = Trajectory()
    for t, st in zip(traj.times, traj.states):
        scaled.times.append(t / lam)
        scaled.states.append(
            AuxState(st.u.copy(), lam * st.ut, st.v.copy(), lam * st.vt,
                     t / lam)
        )
    rows0 = consistency_report(grid, traj, **report_kwargs)
    rows1 = consistency_report(scaled_grid, scaled, **report_kwargs)
    names = ("oneform_x", "oneform_y", "twoform", "curl_identity",
             "monopole_t", "monopole_x", "monopole_y")
    ratios = {}
    for name in names:
        vals = []
        for r0, r1 in zip(rows0, rows1):
            base = lam * r0[name]
            if base > 1e-13 * max(r0["scale"], 1.0):
                vals.append(r1[name] / base)
        ratios[name] = max(vals) if vals else 1.0
    return {"lam": lam, "original": rows0, "rescaled": rows1,
            "ratio": ratios}
