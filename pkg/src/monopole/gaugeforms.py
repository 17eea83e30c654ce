"""Gauge-theoretic layer: differential forms, curvature, field-equation
residuals, gauge transformations, and Coulomb-gauge projection.

Fields are (N, N, n, n) arrays over a TorusGrid.  Index 0 is time, 1 and 2
are the spatial axes; the spatial metric is euclidean, space-time is
diag(-1, 1, 1).  Snapshots carry no time axis, so operators that need a
time derivative take it as an explicit argument rather than inventing one.

Hodge star conventions (componentwise, signs baked into `_STAR_TABLES`):

    euclidean R^2:      *1 = dx^dy,  *dx = dy,  *dy = -dx,  *(dx^dy) = 1
    diag(-1,1,1):       *dt = dx^dy,  *dx = dt^dy,  *dy = -dt^dx
                        *(dt^dx) = dy,  *(dt^dy) = -dx,  *(dx^dy) = -dt

so the star is an involution up to sign: +1 on euclidean degrees 0/2,
-1 on euclidean 1-forms and on all space-time degrees handled here.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GaugeError, NonContractionError, SmallnessError
from .kernels import bracket_grid, mul_grid, sandwich_grid
from .liealg import dagger, lie_exp


_FORM_BASES = {
    ("euclidean", 0): ("1",),
    ("euclidean", 1): ("dx", "dy"),
    ("euclidean", 2): ("dx^dy",),
    ("minkowski", 0): ("1",),
    ("minkowski", 1): ("dt", "dx", "dy"),
    ("minkowski", 2): ("dt^dx", "dt^dy", "dx^dy"),
}


@dataclass
class FormField:
    """A matrix-valued differential form: degree, metric tag, components.

    Components are ordered per `_FORM_BASES`; the count must match the
    degree/metric combination.
    """

    degree: int
    metric: str
    components: tuple

    def __post_init__(self):
        key = (self.metric, self.degree)
        if key not in _FORM_BASES:
            raise ValueError(f"unsupported form type {key}")
        want = len(_FORM_BASES[key])
        if len(self.components) != want:
            raise ValueError(
                f"{self.metric} degree-{self.degree} form needs {want} "
                f"components, got {len(self.components)}"
            )
        self.components = tuple(np.asarray(c) for c in self.components)

    @property
    def basis(self):
        return _FORM_BASES[(self.metric, self.degree)]


# out_degree, and for each output component: (input index, sign)
_STAR_TABLES = {
    ("euclidean", 0): (2, ((0, 1.0),)),
    ("euclidean", 1): (1, ((1, -1.0), (0, 1.0))),       # (P,Q) -> (-Q, P)
    ("euclidean", 2): (0, ((0, 1.0),)),
    ("minkowski", 1): (2, ((2, -1.0), (1, 1.0), (0, 1.0))),
    ("minkowski", 2): (1, ((2, -1.0), (1, -1.0), (0, 1.0))),
}


def hodge_star(w: FormField) -> FormField:
    """Apply the Hodge star, componentwise per the tables in the module doc."""
    key = (w.metric, w.degree)
    if key not in _STAR_TABLES:
        raise ValueError(f"hodge star not defined here for {key}")
    out_degree, moves = _STAR_TABLES[key]
    comps = tuple(sign * w.components[src] for src, sign in moves)
    return FormField(out_degree, w.metric, comps)


@dataclass
class Connection:
    """Space-time connection components; a0 is optional (nondynamical)."""

    a1: np.ndarray
    a2: np.ndarray
    a0: Optional[np.ndarray] = None

    def spatial_divergence(self, grid):
        return grid.partial_derivative(self.a1, 1) + grid.partial_derivative(
            self.a2, 2
        )

    def coulomb_defect(self, grid):
        """Relative divergence norm ||d1 a1 + d2 a2|| / (||a1|| + ||a2||)."""
        den = grid.l2_norm(self.a1) + grid.l2_norm(self.a2)
        if den == 0.0:
            return 0.0
        return grid.l2_norm(self.spatial_divergence(grid)) / den

    def is_coulomb(self, grid, tol_c=1e-9):
        return self.coulomb_defect(grid) <= tol_c


class Curvature:
    """Antisymmetric curvature components; [alpha, beta] indexing.

    Temporal components exist only when the connection carried a0 and the
    spatial time derivatives were supplied.
    """

    def __init__(self, f12, f01=None, f02=None):
        self._c = {(1, 2): f12}
        if f01 is not None:
            self._c[(0, 1)] = f01
        if f02 is not None:
            self._c[(0, 2)] = f02
        self.shape = f12.shape

    @property
    def has_temporal(self):
        return (0, 1) in self._c

    def __getitem__(self, idx):
        alpha, beta = idx
        if alpha == beta:
            return np.zeros(self.shape, dtype=complex)
        if (alpha, beta) in self._c:
            return self._c[(alpha, beta)]
        if (beta, alpha) in self._c:
            return -self._c[(beta, alpha)]
        raise GaugeError(
            "temporal curvature components need a0 and the time derivatives "
            "of the spatial connection"
        )


def curvature(grid, conn, dt_a1=None, dt_a2=None):
    """Curvature F[a,b] = d_a A_b - d_b A_a + [A_a, A_b].

    F[1,2] is always available; the temporal components F[0,i] additionally
    need conn.a0 and dt_a1/dt_a2 (time derivatives of the spatial part,
    supplied by the caller from the evolution state).
    """
    f12 = (
        grid.partial_derivative(conn.a2, 1)
        - grid.partial_derivative(conn.a1, 2)
        + bracket_grid(conn.a1, conn.a2)
    )
    f01 = f02 = None
    if conn.a0 is not None and dt_a1 is not None and dt_a2 is not None:
        f01 = dt_a1 - grid.partial_derivative(conn.a0, 1) + bracket_grid(conn.a0, conn.a1)
        f02 = dt_a2 - grid.partial_derivative(conn.a0, 2) + bracket_grid(conn.a0, conn.a2)
    return Curvature(f12, f01, f02)


def covariant_derivative(grid, conn, phi, alpha, dt_phi=None):
    """D_alpha phi = d_alpha phi + [A_alpha, phi]; alpha=0 needs dt_phi."""
    if alpha == 0:
        if dt_phi is None or conn.a0 is None:
            raise GaugeError("temporal covariant derivative needs a0 and dt_phi")
        return dt_phi + bracket_grid(conn.a0, phi)
    if alpha in (1, 2):
        a = conn.a1 if alpha == 1 else conn.a2
        return grid.partial_derivative(phi, alpha) + bracket_grid(a, phi)
    raise ValueError("alpha must be 0, 1 or 2")


def monopole_residual(grid, conn, phi, dt_a1, dt_a2, dt_phi):
    """Residual of the first-order system in components.

    Returns (D0 phi - F[1,2], D1 phi - F[0,2], D2 phi - F[1,0]); all three
    vanish exactly when the first-order equations hold on the grid.
    """
    f = curvature(grid, conn, dt_a1, dt_a2)
    rt = covariant_derivative(grid, conn, phi, 0, dt_phi) - f[1, 2]
    rx = covariant_derivative(grid, conn, phi, 1) - f[0, 2]
    ry = covariant_derivative(grid, conn, phi, 2) - f[1, 0]
    return rt, rx, ry


def unitarity_defect(g):
    """Max pointwise Frobenius distance of g from the unitary group."""
    n = g.shape[-1]
    gram = mul_grid(g, dagger(g))
    gram = gram - np.eye(n)
    return float(np.max(np.sqrt(np.sum(np.abs(gram) ** 2, axis=(-2, -1)))))


def gauge_transform(grid, conn, phi, g, dt_g=None, unitary_tol=1e-8):
    """Act with a unitary field g: A -> g A g^-1 + g d(g^-1), phi -> g phi g^-1.

    Spatial derivatives of g^-1 are spectral; the temporal part of the
    transformed connection uses dt_g when given and otherwise treats g as
    time-independent.  phi may be None (connection-only transform).
    """
    defect = unitarity_defect(g)
    if defect > unitary_tol:
        raise GaugeError(
            f"gauge field is not unitary (defect {defect:.3e} > {unitary_tol:g})"
        )
    ginv = dagger(g)
    b1 = sandwich_grid(g, conn.a1) + mul_grid(g, grid.partial_derivative(ginv, 1))
    b2 = sandwich_grid(g, conn.a2) + mul_grid(g, grid.partial_derivative(ginv, 2))
    if conn.a0 is None and dt_g is None:
        b0 = None
    else:
        b0 = np.zeros_like(conn.a1)
        if conn.a0 is not None:
            b0 = b0 + sandwich_grid(g, conn.a0)
        if dt_g is not None:
            b0 = b0 + mul_grid(g, dagger(dt_g))
    phi_g = sandwich_grid(g, phi) if phi is not None else None
    return Connection(b1, b2, b0), phi_g


def identity_gauge(grid):
    eye = np.eye(grid.n, dtype=complex)
    return np.broadcast_to(eye, (grid.N, grid.N, grid.n, grid.n)).copy()


def coulomb_project(
    grid,
    a1,
    a2,
    smallness=0.1,
    smallness_s=0.3,
    tol_c=1e-9,
    max_iter=60,
):
    """Iteratively gauge a spatial connection into Coulomb form.

    Each sweep solves the Poisson equation lap(chi) = d1 a1 + d2 a2 for the
    current connection and applies the unitary exp(chi); in the abelian case
    one sweep is exact, and for small data the divergence contracts
    geometrically (the returned history records the relative defect per
    sweep).  Returns (g, projected Connection, defect_history).

    Raises SmallnessError when the discrete Sobolev norm of the data exceeds
    the `smallness` threshold, and NonContractionError when the defect stops
    contracting or max_iter is hit -- both signal data outside the small-data
    regime this projection is built for.
    """
    size = grid.sobolev_norm(a1, smallness_s) + grid.sobolev_norm(a2, smallness_s)
    if size > smallness:
        raise SmallnessError(
            f"connection norm {size:.3e} exceeds the Coulomb projection "
            f"smallness threshold {smallness:g}"
        )
    g = identity_gauge(grid)
    conn = Connection(np.array(a1, dtype=complex), np.array(a2, dtype=complex))
    history = [conn.coulomb_defect(grid)]
    for _ in range(max_iter):
        if history[-1] <= tol_c:
            return g, conn, history
        div = conn.spatial_divergence(grid)
        # the divergence of a periodic field is mean-zero identically; strip
        # the roundoff mean so late sweeps on noise-level defects stay solvable
        chi = grid.inverse_laplacian(div - grid.mean(div))
        step = lie_exp(chi)
        conn, _ = gauge_transform(grid, conn, None, step)
        g = mul_grid(step, g)
        history.append(conn.coulomb_defect(grid))
        if history[-1] >= history[-2] and history[-1] > tol_c:
            raise NonContractionError(
                f"Coulomb defect stopped contracting at {history[-1]:.3e}; "
                "data appears to violate the smallness regime"
            )
    raise NonContractionError(
        f"Coulomb projection did not reach tol_c={tol_c:g} within "
        f"{max_iter} sweeps (last defect {history[-1]:.3e})"
    )
