"""End-to-end acceptance gates.

Every test prints one `[acceptance] criterion N: PASS|FAIL` line (run with
`pytest -s tests/test_acceptance.py` to see the verdict table) and then
asserts it, so the suite fails loudly if any gate slips.  Criteria 2 and 3
share one cached evolution study.
"""

import json
import math
import time

import numpy as np
import pytest

import monopole as mp
from monopole import synth
from monopole.analysis import (
    admissible_params,
    estimate_ratio,
    sample_from_arrays,
    scaling_residual,
    symbol_q,
    symbol_q_bound,
)
from monopole.auxsystem import (
    ELLIPTIC_SMALLNESS,
    build_initial_data,
    consistency_report,
    elliptic_solve_A0,
    evolve,
    picard_solve,
    reconstruct,
)
from monopole.cli import _verify_window, main
from monopole.errors import SmallnessError
from monopole.gaugeforms import Connection, curvature, gauge_transform
from monopole.kernels import sandwich_grid
from monopole.liealg import lie_exp
from monopole.snapshot import load_snapshot, save_snapshot
from monopole.spectral import resample

RESIDUAL_NAMES = (
    "oneform_x", "oneform_y", "twoform", "curl_identity",
    "monopole_t", "monopole_x", "monopole_y",
)

_CACHE = {}


def _verdict(number, ok, detail=""):
    line = f"[acceptance] criterion {number}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line, flush=True)
    return ok


def _max_residuals(rows):
    out = {n: max(r[n] for r in rows) for n in RESIDUAL_NAMES}
    out["coulomb"] = max(r["coulomb"] for r in rows)
    return out


# -- criterion 1: the data map inverts ------------------------------------------


def test_criterion_01_round_trip():
    grid = mp.TorusGrid(64, 2.0 * np.pi)
    rng = np.random.default_rng(0)
    a1, a2, f0 = synth.coulomb_pair(grid, rng, band=6, amplitude=0.1)
    phi0 = synth.lie_field(grid, rng, band=6, amplitude=0.1)
    t0 = time.perf_counter()
    aux, _ = build_initial_data(grid, a1, a2, phi0)
    phys = reconstruct(grid, aux)
    elapsed = time.perf_counter() - t0
    scale = grid.l2_norm(a1) + grid.l2_norm(a2) + grid.l2_norm(phi0)
    worst = max(
        grid.l2_norm(phys.phi - phi0),
        grid.l2_norm(-phys.df2 - a1),
        grid.l2_norm(phys.df1 - a2),
        grid.l2_norm(phys.f - f0),
    ) / scale
    ok = worst <= 1e-10 and elapsed < 1.0
    assert _verdict(1, ok, f"relative error {worst:.2e}, {elapsed:.2f}s")


# -- criteria 2 and 3: refinement of the consistency residuals --------------------


def _dt_study():
    """N=64 run at two step sizes, snapshots every step; cached for reuse."""
    if "dt" not in _CACHE:
        grid = mp.TorusGrid(64, 2.0 * np.pi)
        rng = np.random.default_rng(11)
        a1, a2, phi0 = synth.initial_data(
            grid, rng, band=4, amplitude=0.02, point_symmetric=True
        )
        state, _ = build_initial_data(grid, a1, a2, phi0)
        traj_a = evolve(grid, state.copy(), 0.5, 0.05, snapshot_stride=1)
        traj_b = evolve(grid, state.copy(), 0.5, 0.025, snapshot_stride=1)
        rows_a = consistency_report(grid, traj_a)
        rows_b = consistency_report(grid, traj_b)
        _CACHE["dt"] = (grid, traj_a, traj_b, rows_a, rows_b)
    return _CACHE["dt"]


def _anchored_rows(grid, a1, a2, phi0, dt, anchor_steps):
    """Advance with sparse snapshots; at each anchor take two unit-stride
    steps and report on that dense triple, so the centered-difference spacing
    is dt for any horizon."""
    state, _ = build_initial_data(grid, a1, a2, phi0)
    rows, done = [], 0
    for k in anchor_steps:
        advance = k - done
        if advance > 0:
            traj = evolve(grid, state, advance * dt, dt,
                          snapshot_stride=advance)
            state = traj.final()
        dense = evolve(grid, state, 2 * dt, dt, snapshot_stride=1)
        state = dense.final()
        done = k + 2
        rows.extend(consistency_report(grid, dense))
    return rows


def test_criterion_02_residual_refinement():
    t0 = time.perf_counter()

    # halving dt at fixed N = 64
    _, _, _, rows_a, rows_b = _dt_study()
    max_a, max_b = _max_residuals(rows_a), _max_residuals(rows_b)
    dt_ratios = {n: max_a[n] / max_b[n] for n in RESIDUAL_NAMES}

    # doubling N at fixed smooth data and fixed dt
    g64 = mp.TorusGrid(64, 2.0 * np.pi)
    g128 = mp.TorusGrid(128, 2.0 * np.pi)
    dt = 0.5 / 600.0
    anchors = [118, 358, 598]
    rng = np.random.default_rng(7)
    a1, a2, _ = synth.coulomb_pair(
        g64, rng, band=18.0, amplitude=0.24,
        scalar=synth.shell_scalar, point_symmetric=True,
    )
    phi0 = synth.shell_lie_field(g64, rng, 18.0, amplitude=0.24,
                                 point_symmetric=True)
    coarse = _max_residuals(_anchored_rows(g64, a1, a2, phi0, dt, anchors))
    fine = _max_residuals(_anchored_rows(
        g128, resample(g64, g128, a1), resample(g64, g128, a2),
        resample(g64, g128, phi0), dt, anchors,
    ))
    n_ratios = {n: coarse[n] / fine[n] for n in RESIDUAL_NAMES}

    elapsed = time.perf_counter() - t0
    worst_dt = min(dt_ratios.values())
    worst_n = min(n_ratios.values())
    ok = worst_dt >= 3.5 and worst_n >= 10.0 and elapsed < 120.0
    assert _verdict(
        2, ok,
        f"dt-halving worst x{worst_dt:.2f} (gate 3.5), "
        f"N-doubling worst x{worst_n:.1f} (gate 10), {elapsed:.0f}s",
    )


def test_criterion_03_coulomb_preserved():
    grid, traj_a, traj_b, rows_a, rows_b = _dt_study()
    defects = []
    for traj in (traj_a, traj_b):
        for state in traj.states:
            phys = reconstruct(grid, state)
            defects.append(phys.connection().coulomb_defect(grid))
    worst = max(defects)
    ok = worst <= 1e-9
    assert _verdict(
        3, ok, f"worst defect {worst:.2e} over {len(defects)} snapshots"
    )


# -- criterion 4: curvature is gauge covariant --------------------------------------


def test_criterion_04_gauge_covariance():
    grid = mp.TorusGrid(64, 2.0 * np.pi)
    rng = np.random.default_rng(33)
    a1 = synth.lie_field(grid, rng, band=5, amplitude=0.3)
    a2 = synth.lie_field(grid, rng, band=5, amplitude=0.3)
    g = lie_exp(synth.lie_field(grid, np.random.default_rng(34), band=3,
                                amplitude=0.5))
    f = curvature(grid, Connection(a1, a2))
    conn_g, _ = gauge_transform(grid, Connection(a1, a2), None, g)
    f_g = curvature(grid, conn_g)
    diff = grid.l2_norm(f_g[1, 2] - sandwich_grid(g, f[1, 2]))
    rel = diff / grid.l2_norm(f[1, 2])
    ok = rel <= 1e-8
    assert _verdict(4, ok, f"relative covariance defect {rel:.2e}")


# -- criterion 5: the elliptic threshold behaves as documented ------------------------


def test_criterion_05_elliptic_threshold():
    grid = mp.TorusGrid(64, 2.0 * np.pi)
    half = 0.501 * ELLIPTIC_SMALLNESS

    rng = np.random.default_rng(5)
    a1, a2, _ = synth.coulomb_pair(grid, rng, band=1, amplitude=half)
    phi0 = synth.lie_field(grid, rng, band=1, amplitude=half)
    aux, _ = build_initial_data(grid, a1, a2, phi0)
    phys = reconstruct(grid, aux)
    _, info = elliptic_solve_A0(grid, phys.df1, phys.df2, phys.phi)
    contraction_ok = info.ratio < 0.5 and info.residual <= 1e-10

    # doubling the data crosses the threshold: the documented failure path
    rng = np.random.default_rng(5)
    b1, b2, _ = synth.coulomb_pair(grid, rng, band=1, amplitude=2.0 * half)
    psi0 = synth.lie_field(grid, rng, band=1, amplitude=2.0 * half)
    aux2, _ = build_initial_data(grid, b1, b2, psi0)
    phys2 = reconstruct(grid, aux2)
    try:
        elliptic_solve_A0(grid, phys2.df1, phys2.df2, phys2.phi)
        failure_ok = False
        message = "no error raised"
    except SmallnessError as exc:
        message = str(exc)
        failure_ok = "threshold" in message

    ok = contraction_ok and failure_ok
    assert _verdict(
        5, ok,
        f"ratio {info.ratio:.3f} residual {info.residual:.1e}; "
        f"doubled data -> SmallnessError: {failure_ok}",
    )


# -- criterion 6: the slab iteration contracts onto the marching solution ---------------


def test_criterion_06_picard():
    grid = mp.TorusGrid(64, 2.0 * np.pi)
    rng = np.random.default_rng(3)
    a1, a2, phi0 = synth.initial_data(grid, rng, band=4, amplitude=0.05)
    T, dt, J = 0.25, 0.0125, 8

    result = picard_solve(grid, a1, a2, phi0, T, dt, J)
    diffs = [d["total"] for d in result.diffs]
    # the tail bottoms out at accumulated FFT roundoff (~1e-12 of the first
    # correction); ratios of noise against noise say nothing about contraction
    floor = 1e-11 * diffs[0]
    geometric_ok = True
    checked = 0
    for j in range(2, len(diffs)):
        if diffs[j - 1] <= floor or diffs[j] <= floor:
            break
        geometric_ok = geometric_ok and (diffs[j] / diffs[j - 1] <= 0.7)
        checked += 1

    state, _ = build_initial_data(grid, a1, a2, phi0)
    coarse = evolve(grid, state.copy(), T, dt, snapshot_stride=10**6)
    fine = evolve(grid, state.copy(), T, dt / 2.0, snapshot_stride=10**6)
    self_conv = max(
        grid.l2_norm(coarse.final().u - fine.final().u),
        grid.l2_norm(coarse.final().v - fine.final().v),
    )
    picard_err = max(
        grid.l2_norm(result.states[-1].u - coarse.final().u),
        grid.l2_norm(result.states[-1].v - coarse.final().v),
    )
    match_ok = picard_err <= 2.0 * self_conv

    ok = geometric_ok and checked >= 2 and match_ok
    assert _verdict(
        6, ok,
        f"{checked} geometric ratios <= 0.7; picard-vs-march "
        f"{picard_err:.2e} <= 2 x {self_conv:.2e}",
    )


# -- criterion 7: the null structure is visible in the measured ratios ------------------


def test_criterion_07_null_form_gain():
    t0 = time.perf_counter()
    grid = mp.TorusGrid(128, 2.0 * np.pi)
    times = np.arange(16) * 0.02
    s, theta = 0.3, 0.775

    gaps = []
    pairs = []
    for lam in (8, 16, 32):
        f0, _, _, _ = synth.packet_pair_potential(
            grid, lam, envelope_kappa=2.0, amplitude=1.0
        )
        slices = synth.half_wave_slices(grid, f0, times)
        f_sample = sample_from_arrays(grid, times, slices)
        null = estimate_ratio("M1", f_sample, s=s, theta=theta).max_ratio

        d1 = [grid.partial_derivative(w, 1) for w in slices]
        d2 = [grid.partial_derivative(w, 2) for w in slices]
        generic = estimate_ratio(
            "M2",
            (sample_from_arrays(grid, times, d1),
             sample_from_arrays(grid, times, d2)),
            s=s, theta=theta,
        ).max_ratio
        pairs.append((null, generic))
        gaps.append(generic / null)

    elapsed = time.perf_counter() - t0
    below = all(null < generic for null, generic in pairs)
    monotone = all(b > a for a, b in zip(gaps, gaps[1:]))
    ok = below and monotone and elapsed < 300.0
    assert _verdict(
        7, ok,
        "gaps " + " -> ".join(f"{g:.2f}" for g in gaps)
        + f" at lam 8/16/32, {elapsed:.0f}s",
    )


# -- criterion 8: the null-form symbol and discrete operator agree ------------------------


def _conv_oracle_Q(grid, phi, phit, psi, psit, j):
    """Frequency-side oracle built from scratch: half-wave factors composed
    in Fourier space, direction symbols added per convolution pair."""
    n = grid.N
    freq = np.fft.fftfreq(n, d=1.0 / n)
    k1 = freq[:, None]
    k2 = freq[None, :]
    kabs = np.hypot(k1, k2)
    safe = np.where(kabs == 0.0, 1.0, kabs)
    ah = np.fft.fft2(phit) + 1j * kabs * np.fft.fft2(phi)
    bh = np.fft.fft2(psit) - 1j * kabs * np.fft.fft2(psi)
    unit = (k1 if j == 1 else k2) / safe

    out = np.zeros((n, n), dtype=complex)
    for m1 in range(n):
        for m2 in range(n):
            acc = 0.0 + 0.0j
            for q1 in range(n):
                for q2 in range(n):
                    l1, l2 = (m1 - q1) % n, (m2 - q2) % n
                    acc += (1j * (unit[q1, q2] + unit[l1, l2])
                            * ah[q1, q2] * bh[l1, l2])
            out[m1, m2] = acc / n**2
    return np.fft.ifft2(out)


def test_criterion_08_symbol_and_convolution():
    rng = np.random.default_rng(8)
    zero_worst = 0.0
    for _ in range(200):
        xi = rng.integers(-8, 9, size=2)
        eta = rng.integers(-8, 9, size=2)
        if not xi.any() or not eta.any():
            continue
        lam, tau = rng.normal(scale=3.0, size=2)
        scale = 1.0 + symbol_q_bound(tau, xi, lam, eta)
        for j in (1, 2):
            zero_worst = max(
                zero_worst,
                abs(symbol_q(-math.hypot(*xi), xi, lam, eta, j)) / scale,
                abs(symbol_q(tau, xi, lam, -2.5 * np.asarray(xi, float), j))
                / scale,
            )
    zeros_ok = zero_worst <= 1e-14

    grid = mp.TorusGrid(16, 2.0 * np.pi)
    rng = np.random.default_rng(9)
    fields = [synth.band_scalar(grid, rng, band=4) for _ in range(4)]
    conv_worst = 0.0
    for j in (1, 2):
        got = mp.null_form_Q(grid, *fields, j)
        want = _conv_oracle_Q(grid, *fields, j)
        conv_worst = max(
            conv_worst,
            grid.l2_norm(got - want) / max(grid.l2_norm(want), 1e-300),
        )
    conv_ok = conv_worst <= 1e-10

    ok = zeros_ok and conv_ok
    assert _verdict(
        8, ok,
        f"zero sets {zero_worst:.1e} (gate 1e-14), "
        f"convolution {conv_worst:.1e} (gate 1e-10)",
    )


# -- criterion 9: exponent windows ---------------------------------------------------


def test_criterion_09_parameter_windows():
    empty_ok = admissible_params(0.25).emptiness["eps"]

    win = admissible_params(0.3)
    endpoints_ok = (
        win.eps.lower == 0.0 and not win.eps.lower_open
        and win.eps.upper == pytest.approx(0.1) and win.eps.upper_open
        and win.theta.lower == pytest.approx(0.75) and win.theta.lower_open
        and win.theta.upper == pytest.approx(0.8) and not win.theta.upper_open
        and win.inv_q.lower == pytest.approx(0.15)
        and win.inv_q.upper == pytest.approx(0.2)
    )
    checks = _verify_window(win)  # 100 interior points per interval
    sampled_ok = all(checks.values())

    ok = empty_ok and endpoints_ok and sampled_ok
    assert _verdict(
        9, ok,
        f"s=1/4 empty: {empty_ok}; s=0.3 endpoints: {endpoints_ok}; "
        f"{len(checks)} sampled windows hold: {sampled_ok}",
    )


# -- criterion 10: scaling covariance of the residual system ----------------------------


def test_criterion_10_scaling():
    grid = mp.TorusGrid(32, 2.0 * np.pi)
    rng = np.random.default_rng(10)
    a1, a2, _ = synth.coulomb_pair(grid, rng, band=3, amplitude=0.03)
    phi0 = synth.lie_field(grid, rng, band=3, amplitude=0.03)
    aux, _ = build_initial_data(grid, a1, a2, phi0)
    traj = evolve(grid, aux, T=0.1, dt=0.01)
    out = scaling_residual(grid, traj, 2.0)
    ratios = out["ratio"]
    worst = max(max(r, 1.0 / r) for r in ratios.values())
    ok = worst <= 2.0
    assert _verdict(
        10, ok,
        "lam=2 ratios within x"
        f"{worst:.2f} of degree counting (band 2.0)",
    )


# -- criterion 11: determinism and lossless state files -----------------------------------


def test_criterion_11_determinism(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "n_points = 16\nband = 2\namplitude = 0.02\n"
        "time_horizon = 0.04\ndt = 0.01\nseed = 3\n"
    )
    out1, out2 = tmp_path / "a", tmp_path / "b"
    rc1 = main(["simulate", "--config", str(cfg), "--out", str(out1)])
    rc2 = main(["simulate", "--config", str(cfg), "--out", str(out2)])
    repro_ok = (
        rc1 == 0 and rc2 == 0
        and (out1 / "series.csv").read_bytes() == (out2 / "series.csv").read_bytes()
        and (out1 / "final.snap").read_bytes() == (out2 / "final.snap").read_bytes()
        and json.loads((out1 / "summary.json").read_text())["gates"]
        == json.loads((out2 / "summary.json").read_text())["gates"]
    )

    grid = mp.TorusGrid(16, 2.0 * np.pi)
    rng = np.random.default_rng(11)
    w = synth.lie_field(grid, rng, band=3, amplitude=0.7)
    p = str(tmp_path / "w.snap")
    save_snapshot(p, grid, {"w": w}, time=2.5)
    back = load_snapshot(p).components["w"]
    snap_ok = np.array_equal(back, w)  # bit exact, not just close

    ok = repro_ok and snap_ok
    assert _verdict(
        11, ok, f"reruns byte-identical: {repro_ok}; "
        f"snapshot round trip bit-exact: {snap_ok}"
    )
