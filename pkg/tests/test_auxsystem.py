import numpy as np
import numpy.testing as npt
import pytest

from monopole import (
    BlowupError,
    ConfigError,
    NonContractionError,
    SmallnessError,
    TorusGrid,
    build_initial_data,
    elliptic_solve_A0,
    evolve,
    picard_solve,
    reconstruct,
    synth,
)
from monopole.auxsystem import (
    AuxState,
    PhysState,
    Trajectory,
    assemble_Bpm,
    consistency_report,
    elliptic_rhs,
    nonlinearity_B,
    wave_energy,
)
from monopole.kernels import bracket_grid
from monopole.liealg import su2_basis
from monopole.synth import point_symmetrize

GRID = TorusGrid(32, 2.0 * np.pi)
T_ = su2_basis()
ZERO = np.zeros((32, 32, 2, 2), dtype=complex)


def _phys(seed, band=4, amplitude=0.1, grid=GRID):
    rng = np.random.default_rng(seed)
    a1, a2, _ = synth.coulomb_pair(grid, rng, band=band, amplitude=amplitude)
    phi0 = synth.lie_field(grid, rng, band=band, amplitude=amplitude)
    aux, _ = build_initial_data(grid, a1, a2, phi0)
    return aux, reconstruct(grid, aux)


# nonlinearities ---------------------------------------------------------


def test_b1_product_mode_oracle():
    # f = sin(x) T1 + sin(y) T2  ->  [d1 f, d2 f] = cos(x)cos(y) [T1, T2]
    x1, x2 = np.broadcast_arrays(GRID.x1, GRID.x2)
    f = (np.sin(x1)[..., None, None] * T_[1]
         + np.sin(x2)[..., None, None] * T_[2])
    df1 = GRID.partial_derivative(f, 1)
    df2 = GRID.partial_derivative(f, 2)
    phys = PhysState(ZERO, f, df1, df2)
    got = nonlinearity_B(GRID, 1, phys)
    comm = T_[1] @ T_[2] - T_[2] @ T_[1]
    want = (np.cos(x1) * np.cos(x2))[..., None, None] * comm
    npt.assert_allclose(got, want, atol=1e-12)


def test_all_kinds_vanish_on_commuting_fields():
    rng = np.random.default_rng(0)
    s = synth.band_scalar(GRID, rng, band=3)[..., None, None]
    f = 0.1 * s * T_[0]
    phys = PhysState(
        0.1 * s * T_[0], f,
        GRID.partial_derivative(f, 1), GRID.partial_derivative(f, 2),
        a0=0.1 * s * T_[0],
    )
    for kind in (1, 2, 3, 4):
        npt.assert_allclose(nonlinearity_B(GRID, kind, phys), 0.0, atol=1e-14)


def test_b2_aux_path_matches_phys_path():
    aux, phys = _phys(1)
    from_phys = nonlinearity_B(GRID, 2, phys)
    from_aux = nonlinearity_B(GRID, 2, aux=aux)
    npt.assert_allclose(from_aux, from_phys, atol=1e-12)


def test_nonlinearity_argument_errors():
    _, phys = _phys(2)
    phys.a0 = None
    with pytest.raises(ValueError):
        nonlinearity_B(GRID, 3, phys)
    with pytest.raises(ValueError):
        nonlinearity_B(GRID, 4, phys)
    with pytest.raises(ValueError):
        nonlinearity_B(GRID, 5, phys)


def test_assemble_signs():
    rng = np.random.default_rng(3)
    b = [synth.lie_field(GRID, rng, band=2) for _ in range(4)]
    bp, bm = assemble_Bpm(*b)
    npt.assert_allclose(bp + bm, 2.0 * (-b[0] + b[2]), atol=1e-13)
    npt.assert_allclose(bp - bm, 2.0 * (b[1] + b[3]), atol=1e-13)


def test_dealias_flag_truncates_output():
    # band 10 on N=32: quadratic products run past the |m| <= N/3 cutoff
    _, phys = _phys(4, band=10, amplitude=0.3)
    raw = nonlinearity_B(GRID, 1, phys)
    cut = nonlinearity_B(GRID, 1, phys, dealias=True)
    npt.assert_allclose(cut, GRID.dealias(raw), atol=1e-13)
    assert GRID.l2_norm(raw - cut) > 1e-12  # quadratic term has alias content


# elliptic constraint ----------------------------------------------------


def test_elliptic_zero_gradient_gives_zero():
    a0, info = elliptic_solve_A0(GRID, ZERO, ZERO, ZERO)
    npt.assert_allclose(a0, 0.0, atol=0)
    assert info.iterations == 1


def test_elliptic_commuting_gives_zero():
    rng = np.random.default_rng(5)
    s = synth.band_scalar(GRID, rng, band=3)[..., None, None]
    f = 0.1 * s * T_[0]
    a0, _ = elliptic_solve_A0(
        GRID,
        GRID.partial_derivative(f, 1),
        GRID.partial_derivative(f, 2),
        0.1 * s * T_[0],
    )
    npt.assert_allclose(a0, 0.0, atol=1e-14)


def test_elliptic_solution_satisfies_constraint():
    """Independent residual check: lap a0 == rhs(a0) in real space."""
    _, phys = _phys(6, amplitude=0.2)
    a0, info = elliptic_solve_A0(GRID, phys.df1, phys.df2, phys.phi, tol=1e-12)
    lap = GRID.apply_symbol(a0, -GRID.k2.astype(complex))
    rhs = elliptic_rhs(GRID, a0, phys.df1, phys.df2, phys.phi)
    assert GRID.l2_norm(lap - rhs) <= 1e-10 * max(GRID.l2_norm(rhs), 1e-12)
    assert info.residual <= 1e-12


def test_elliptic_contraction_at_half_threshold():
    rng = np.random.default_rng(5)
    a1, a2, _ = synth.coulomb_pair(GRID, rng, band=1, amplitude=0.25)
    phi0 = synth.lie_field(GRID, rng, band=1, amplitude=0.25)
    aux, _ = build_initial_data(GRID, a1, a2, phi0)
    phys = reconstruct(GRID, aux)
    a0, info = elliptic_solve_A0(GRID, phys.df1, phys.df2, phys.phi)
    assert info.ratio < 0.5
    assert info.residual <= 1e-10


def test_elliptic_smallness_gate_at_double_threshold():
    rng = np.random.default_rng(5)
    a1, a2, _ = synth.coulomb_pair(GRID, rng, band=1, amplitude=0.501)
    phi0 = synth.lie_field(GRID, rng, band=1, amplitude=0.501)
    aux, _ = build_initial_data(GRID, a1, a2, phi0, tol_c=1e-6)
    phys = reconstruct(GRID, aux)
    with pytest.raises(SmallnessError):
        elliptic_solve_A0(GRID, phys.df1, phys.df2, phys.phi)


def test_elliptic_non_contraction_on_large_data():
    rng = np.random.default_rng(5)
    a1, a2, _ = synth.coulomb_pair(GRID, rng, band=1, amplitude=8.0)
    phi0 = synth.lie_field(GRID, rng, band=1, amplitude=8.0)
    df1, df2 = a2, -a1
    with pytest.raises(NonContractionError):
        elliptic_solve_A0(GRID, df1, df2, phi0, smallness=1e9, max_iter=60)


def test_elliptic_warm_start_helps():
    _, phys = _phys(7, amplitude=0.2)
    a0, cold = elliptic_solve_A0(GRID, phys.df1, phys.df2, phys.phi)
    _, warm = elliptic_solve_A0(
        GRID, phys.df1, phys.df2, phys.phi, a0_guess=a0
    )
    assert warm.iterations <= cold.iterations
    assert warm.iterations <= 2


# time stepping ----------------------------------------------------------


def test_evolve_zero_stays_zero():
    traj = evolve(GRID, AuxState(ZERO, ZERO, ZERO, ZERO), T=0.1, dt=0.01)
    for s in traj.states:
        npt.assert_allclose(s.u, 0.0, atol=0)
        npt.assert_allclose(s.vt, 0.0, atol=0)
    assert wave_energy(GRID, traj.final()) == 0.0


def test_evolve_config_errors():
    state = AuxState(ZERO, ZERO, ZERO, ZERO)
    with pytest.raises(ConfigError):
        evolve(GRID, state, T=0.1, dt=-0.01)
    with pytest.raises(ConfigError):
        evolve(GRID, state, T=1.0, dt=1.0)  # dt*kmax far above the cap
    with pytest.raises(ConfigError):
        evolve(GRID, state, T=0.1, dt=0.03)  # T not a multiple of dt


def test_evolve_blowup_cap():
    rng = np.random.default_rng(8)
    a1, a2, _ = synth.coulomb_pair(GRID, rng, band=3, amplitude=0.05)
    phi0 = synth.lie_field(GRID, rng, band=3, amplitude=0.05)
    aux, _ = build_initial_data(GRID, a1, a2, phi0)
    with pytest.raises(BlowupError):
        evolve(GRID, aux, T=0.1, dt=0.01, norm_cap=1e-6)


def test_evolve_snapshot_bookkeeping():
    rng = np.random.default_rng(9)
    a1, a2, _ = synth.coulomb_pair(GRID, rng, band=3, amplitude=0.02)
    phi0 = synth.lie_field(GRID, rng, band=3, amplitude=0.02)
    aux, _ = build_initial_data(GRID, a1, a2, phi0)
    traj = evolve(GRID, aux, T=0.1, dt=0.01, snapshot_stride=5)
    npt.assert_allclose(traj.times, [0.0, 0.05, 0.1], atol=1e-12)
    assert len(traj.states) == 3
    assert len(traj.steps) == 2
    assert all(row["elliptic_iters"] >= 2 for row in traj.steps)


def test_evolve_self_convergence_second_order():
    rng = np.random.default_rng(10)
    a1, a2, _ = synth.coulomb_pair(GRID, rng, band=3, amplitude=0.05)
    phi0 = synth.lie_field(GRID, rng, band=3, amplitude=0.05)
    aux, _ = build_initial_data(GRID, a1, a2, phi0)

    finals = []
    for dt in (0.02, 0.01, 0.005):
        traj = evolve(GRID, aux, T=0.2, dt=dt, snapshot_stride=10**6)
        finals.append(traj.final())
    e_coarse = GRID.l2_norm(finals[0].ut - finals[1].ut)
    e_fine = GRID.l2_norm(finals[1].ut - finals[2].ut)
    assert e_coarse / e_fine > 3.5  # second-order stepping


def test_evolve_preserves_point_symmetric_sector():
    rng = np.random.default_rng(11)
    a1, a2, _ = synth.coulomb_pair(
        GRID, rng, band=3, amplitude=0.05, point_symmetric=True
    )
    phi0 = synth.lie_field(GRID, rng, band=3, amplitude=0.05,
                           point_symmetric=True)
    aux, _ = build_initial_data(GRID, a1, a2, phi0)
    traj = evolve(GRID, aux, T=0.1, dt=0.01, snapshot_stride=10)
    final = traj.final()
    for w in (final.u, final.ut, final.v, final.vt):
        npt.assert_allclose(point_symmetrize(w), w, atol=1e-12)


# whole-slab iteration -----------------------------------------------------


def test_picard_zero_data():
    res = picard_solve(GRID, ZERO, ZERO, ZERO, T=0.05, dt=0.01, J=3)
    assert res.iterations == 3
    for d in res.diffs:
        assert d["total"] == 0.0
    for s in res.states:
        npt.assert_allclose(s.u, 0.0, atol=0)


def test_picard_diffs_decay_on_small_data():
    rng = np.random.default_rng(12)
    a1, a2, _ = synth.coulomb_pair(GRID, rng, band=3, amplitude=0.05)
    phi0 = synth.lie_field(GRID, rng, band=3, amplitude=0.05)
    res = picard_solve(GRID, a1, a2, phi0, T=0.1, dt=0.01, J=5)
    totals = [d["total"] for d in res.diffs]
    assert totals[0] > 0.0
    # geometric decay until roundoff
    for a, b in zip(totals, totals[1:]):
        if a < 1e-13 * totals[0]:
            break
        assert b < 0.8 * a
    assert len(res.states) == len(res.times) == 11
    assert res.phys[0].a0 is not None


def test_picard_matches_evolve_on_small_data():
    rng = np.random.default_rng(13)
    a1, a2, _ = synth.coulomb_pair(GRID, rng, band=3, amplitude=0.02)
    phi0 = synth.lie_field(GRID, rng, band=3, amplitude=0.02)
    res = picard_solve(GRID, a1, a2, phi0, T=0.05, dt=0.01, J=8)
    aux, _ = build_initial_data(GRID, a1, a2, phi0)
    traj = evolve(GRID, aux, T=0.05, dt=0.01)
    diff = GRID.l2_norm(res.states[-1].ut - traj.final().ut)
    assert diff <= 1e-12 * max(GRID.l2_norm(traj.final().ut), 1e-12)


# consistency report -------------------------------------------------------


def test_consistency_report_zero_trajectory():
    traj = Trajectory(
        times=[0.0, 0.01, 0.02],
        states=[AuxState(ZERO, ZERO, ZERO, ZERO, t) for t in (0, 0.01, 0.02)],
    )
    rows = consistency_report(GRID, traj)
    assert len(rows) == 1
    row = rows[0]
    for key in ("oneform_x", "oneform_y", "twoform", "curl_identity",
                "monopole_t", "monopole_x", "monopole_y", "coulomb",
                "harmonic_defect"):
        assert row[key] == 0.0


def test_consistency_report_needs_three_snapshots():
    traj = Trajectory(
        times=[0.0, 0.01],
        states=[AuxState(ZERO, ZERO, ZERO, ZERO, t) for t in (0, 0.01)],
    )
    with pytest.raises(ValueError):
        consistency_report(GRID, traj)


def test_consistency_residuals_small_on_resolved_run():
    rng = np.random.default_rng(14)
    a1, a2, _ = synth.coulomb_pair(
        GRID, rng, band=2, amplitude=0.02, point_symmetric=True
    )
    phi0 = synth.lie_field(GRID, rng, band=2, amplitude=0.02,
                           point_symmetric=True)
    aux, _ = build_initial_data(GRID, a1, a2, phi0)
    traj = evolve(GRID, aux, T=0.03, dt=0.01)
    rows = consistency_report(GRID, traj)
    for row in rows:
        # centered-difference truncation dominates: O(dt^2) * field scale
        assert row["twoform"] <= 1e-3 * max(row["scale"], 1e-12)
        assert row["coulomb"] <= 1e-9
        assert row["harmonic_defect"] <= 1e-12
