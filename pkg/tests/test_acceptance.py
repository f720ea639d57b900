"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see only the summary
lines, or as part of the full suite.
"""
import math
import time

import numpy as np
import pytest

from qtensor_ieq.config import RunConfig, parse_config, serialize_config
from qtensor_ieq.diagnostics import Monitor, drift
from qtensor_ieq.driver import simulate
from qtensor_ieq.grid import Grid, read_field, write_field
from qtensor_ieq.oracle import baseline_agreement, default_problem, fit_order, run_convergence_study
from qtensor_ieq.stepper import apply_update_operator, step
from qtensor_ieq.tensor import (
    ModelParams,
    bulk_potential,
    frobenius_dot,
    p_of_Q,
    r_of_Q,
    random_tensors,
    s_of_Q,
    to_matrix,
    trace_cube,
    trace_sq,
    uniaxial,
)

TOL = 1e-12


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        return ok

    return emit


def run_problem(pb, dt, keep_states=False):
    """Step a problem to its final time, returning the monitor and per-step data."""
    state = pb.initial_state(dt)
    mon = Monitor(state)
    recs = [mon.first]
    Qs = [state.Q] if keep_states else None
    for _ in range(pb.steps(dt)):
        Pn = p_of_Q(state.Q, pb.params)
        nxt, rep = step(state, TOL, Pn=Pn)
        recs.append(mon.advance(state, nxt, Pn, rep))
        state = nxt
        if keep_states:
            Qs.append(state.Q)
    return state, mon, recs, Qs


@pytest.fixture(scope="module")
def default_run():
    pb = default_problem()
    t0 = time.perf_counter()
    out = run_problem(pb, 1e-3, keep_states=True)
    return pb, out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def drift_levels():
    pb = default_problem()
    t0 = time.perf_counter()
    levels = {}
    for dt in (4e-3, 2e-3, 1e-3):
        state, mon, recs, _ = run_problem(pb, dt)
        levels[dt] = (state, mon, recs)
    return pb, levels, time.perf_counter() - t0


def test_criterion_1_energy_dissipation(default_run, report):
    pb, (state, mon, recs, _), elapsed = default_run
    E = np.array([r.E for r in recs])
    worst_rise = float(np.max(np.diff(E)))
    worst_id = max(abs(r.dE_identity) for r in recs) / mon.E0
    ok = len(recs) == 501 and worst_rise <= 0 and worst_id <= 1e-9 and elapsed < 10
    report(1, ok, f"{len(recs) - 1} steps, max dE = {worst_rise:.2e}, "
                  f"max |identity residual|/E0 = {worst_id:.2e} (<= 1e-9), {elapsed:.2f}s (< 10s)")
    assert ok


def test_criterion_2_h_sum_bound(default_run, report):
    _, (_, mon, recs, _), _ = default_run
    bound = 2 * mon.E0 * (1 + 1e-8)
    peak = max(r.H_sum for r in recs)
    ok = all(r.H_sum <= bound for r in recs)
    report(2, ok, f"max running sum ||H||^2 dt = {peak:.4e} <= 2E0(1+1e-8) = {bound:.4e}")
    assert ok


def test_criterion_3_structure(default_run, report):
    _, (_, _, _, Qs), _ = default_run
    mats = to_matrix(np.stack(Qs))
    tr = float(np.max(np.abs(np.trace(mats, axis1=-2, axis2=-1))))
    asym = float(np.max(np.abs(mats - np.swapaxes(mats, -1, -2))))
    ok = tr <= 1e-14 and asym <= 1e-14
    report(3, ok, f"{len(Qs)} states: max |tr Q| = {tr:.1e}, max |Q - Q^T| = {asym:.1e} (<= 1e-14)")
    assert ok


def test_criterion_4_drift_order(drift_levels, report):
    pb, levels, elapsed = drift_levels
    dts = sorted(levels, reverse=True)
    V = [levels[dt][2][-1].Vn_max for dt in dts]
    V0 = max(levels[dt][2][0].Vn_max for dt in dts)
    V0_direct = float(np.max(np.abs(drift(pb.initial_state(1e-3)))))
    slope, _ = fit_order(dts, V)
    ok = 0.8 <= slope <= 1.2 and V0 == 0.0 and V0_direct == 0.0 and elapsed < 30
    report(4, ok, f"max V_N = {', '.join(f'{v:.3e}' for v in V)} at dt = {dts}; slope {slope:.3f} "
                  f"in [0.8, 1.2]; V_0 = {V0:g}; {elapsed:.2f}s (< 30s)")
    assert ok


def test_criterion_5_higher_energy(drift_levels, report):
    _, levels, _ = drift_levels
    dts = sorted(levels, reverse=True)
    W = [levels[dt][1].W_sup for dt in dts]
    S = [levels[dt][1].lapl_sum for dt in dts]
    w_ratio, s_ratio = max(W) / min(W), max(S) / min(S)
    ok = w_ratio < 2 and s_ratio < 2 and all(math.isfinite(v) for v in W + S)
    report(5, ok, f"sup W_n = {', '.join(f'{w:.4f}' for w in W)} (spread {w_ratio:.3f}x); "
                  f"sum ||lap Q||^2 dt = {', '.join(f'{s:.3f}' for s in S)} (spread {s_ratio:.3f}x); both < 2x")
    assert ok


def test_criterion_6_temporal_convergence(report):
    pb = default_problem()
    dts = [4e-3, 2e-3, 1e-3]
    t0 = time.perf_counter()
    study = run_convergence_study(pb, dts)  # raises ReferenceUnconverged if the gate fails
    diffs, base_order, _ = baseline_agreement(pb, dts)
    elapsed = time.perf_counter() - t0
    ok = (
        0.8 <= study.fitted_order <= 1.2
        and study.ref_gate_diff < min(study.err_final_l2) / 4
        and base_order >= 0.8
        and elapsed < 120
    )
    report(6, ok, f"errors {', '.join(f'{e:.3e}' for e in study.err_final_l2)}, order {study.fitted_order:.3f} "
                  f"in [0.8, 1.2]; gate {study.ref_gate_diff:.2e} < {min(study.err_final_l2) / 4:.2e}; "
                  f"baseline diff order {base_order:.3f} >= 0.8; {elapsed:.1f}s (< 120s)")
    assert ok


def test_criterion_7_stencil_order(report):
    hs, errs = [], []
    for n in (32, 64, 128):
        g = Grid.uniform(n, 1.0, "dirichlet")
        (x,) = g.coords()
        f = np.sin(np.pi * x)
        err = (g.laplacian(f) + np.pi**2 * f)[1:-1]
        hs.append(g.h[0])
        errs.append(float(np.max(np.abs(err))))
    slope, _ = fit_order(hs, errs)
    ok = abs(slope - 2.0) <= 0.1
    report(7, ok, f"max Laplacian error {', '.join(f'{e:.3e}' for e in errs)}; slope {slope:.4f} (2 +- 0.1)")
    assert ok


def test_criterion_8_operator_properties(report):
    rng = np.random.default_rng(2024)
    params = ModelParams(-0.3, 1.0, 1.0, 0.01, 1.0, 1.0)
    worst_adj = worst_coer = worst_sbp = 0.0
    for k in range(100):
        bc = ("dirichlet", "neumann")[k % 2]
        dim = 1 + k % 3
        g = Grid.uniform((12, 10, 8)[:dim], 1.0, bc)
        P = random_tensors(rng, g.shape)
        X = g.enforce_bc(random_tensors(rng, g.shape))
        Y = g.enforce_bc(random_tensors(rng, g.shape))
        dt = 10.0 ** rng.uniform(-4, 0)
        AX = apply_update_operator(g, X, P, params, dt)
        AY = apply_update_operator(g, Y, P, params, dt)
        worst_adj = max(worst_adj, abs(g.inner(AX, Y) - g.inner(X, AY)) / (g.norm(AX) * g.norm(Y)))
        # coercivity <AX, X> >= ||X||^2, as a relative shortfall
        worst_coer = max(worst_coer, (g.inner(X, X) - g.inner(AX, X)) / g.inner(X, X))
        sbp = abs(-g.inner(g.laplacian(X), X) - g.gradient_norm_sq(X)) / g.gradient_norm_sq(X)
        worst_sbp = max(worst_sbp, sbp)
    ok = worst_adj <= 1e-12 and worst_coer <= 1e-12 and worst_sbp <= 1e-12
    report(8, ok, f"100 fields: adjointness gap {worst_adj:.1e}, coercivity shortfall {worst_coer:.1e}, "
                  f"summation-by-parts gap {worst_sbp:.1e} (all <= 1e-12)")
    assert ok


def test_criterion_9_pointwise_algebra(report):
    checks = {}
    p111 = ModelParams(1.0, 1.0, 1.0, A0=1.0)
    q = uniaxial(1.0)
    checks["F_B 10/27"] = abs(bulk_potential(q, p111) - 10 / 27) <= 1e-15
    checks["r(0)=1"] = r_of_Q(np.zeros(5), p111) == 1.0
    checks["r uniaxial"] = abs(r_of_Q(q, p111) - math.sqrt(20 / 27 + 1)) <= 1e-15
    checks["r(0)=2 at A0=4"] = r_of_Q(np.zeros(5), ModelParams(1, 1, 1, A0=4.0)) == 2.0

    rng = np.random.default_rng(99)
    pstd = ModelParams(-0.3, 1.0, 1.0, A0=2.0)
    qs = random_tensors(rng, 10_000, 0.5)
    S = s_of_Q(qs, pstd)
    gap = np.abs(p_of_Q(qs, pstd) * r_of_Q(qs, pstd)[:, None] - S)
    checks["P r = S"] = bool(np.all(gap <= 1e-14 * np.maximum(np.abs(S), np.max(np.abs(S), axis=1, keepdims=True))))

    orders = []
    for _ in range(20):
        q0, E = random_tensors(rng, (), 0.5), random_tensors(rng, ())
        exact = frobenius_dot(p_of_Q(q0, pstd), E)
        hs = np.array([1e-2, 5e-3, 2.5e-3])
        errs = [abs((r_of_Q(q0 + h * E, pstd) - r_of_Q(q0 - h * E, pstd)) / (2 * h) - exact) for h in hs]
        orders.append(fit_order(hs, errs)[0])
    checks["central difference order 2"] = all(abs(o - 2.0) <= 0.15 for o in orders)

    # brute-force oracle on full 3x3 matrices
    m = to_matrix(qs)
    m2 = m @ m
    t2 = np.trace(m2, axis1=-2, axis2=-1)
    t3 = np.trace(m2 @ m, axis1=-2, axis2=-1)
    fb = pstd.a / 2 * t2 - pstd.b / 3 * t3 + pstd.c / 4 * t2**2
    s_mat = pstd.a * m - pstd.b * (m2 - t2[:, None, None] * np.eye(3) / 3) + pstd.c * t2[:, None, None] * m
    other = random_tensors(rng, 10_000, 0.5)
    brute = [
        np.max(np.abs(trace_sq(qs) - t2)),
        np.max(np.abs(trace_cube(qs) - t3)),
        np.max(np.abs(bulk_potential(qs, pstd) - fb)),
        np.max(np.abs(to_matrix(S) - s_mat)),
        np.max(np.abs(frobenius_dot(qs, other) - np.einsum("nij,nij->n", m, to_matrix(other)))),
    ]
    checks["3x3 oracle 1e-14"] = max(brute) <= 1e-14
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(9, ok, f"{len(checks)} checks, brute-force max gap {max(brute):.1e}, central-difference orders "
                  f"{min(orders):.3f}..{max(orders):.3f}" + (f"; failed: {failed}" if failed else ""))
    assert ok


def test_criterion_10_determinism_and_round_trips(tmp_path, report):
    cfg = RunConfig(a=-0.3, b=1.0, c=1.0, dt=1e-3, T=0.05, L=0.01, n=(32,),
                    ic_kind="random-seeded", ic_seed=42, ic_amplitude=0.4)
    simulate(cfg, tmp_path / "a", keep_trajectory=False)
    simulate(cfg, tmp_path / "b", keep_trajectory=False)
    same_csv = (tmp_path / "a" / "diagnostics.csv").read_bytes() == (tmp_path / "b" / "diagnostics.csv").read_bytes()

    rng = np.random.default_rng(10)
    field_ok = True
    for g in (Grid.uniform(7, 1.3), Grid.uniform((5, 4), (1.0, 0.3), "neumann"), Grid.uniform((3, 4, 5), 2.0)):
        for f in (random_tensors(rng, g.shape) * 1e-7, rng.standard_normal(g.shape) * 1e9):
            write_field(tmp_path / "f.qf", g, f)
            g2, f2 = read_field(tmp_path / "f.qf")
            field_ok &= g2 == g and np.array_equal(f, f2)

    text = serialize_config(cfg)
    config_ok = parse_config(text) == cfg and serialize_config(parse_config(text)) == text
    ok = same_csv and field_ok and config_ok
    report(10, ok, f"bit-identical CSV: {same_csv}; field files exact: {field_ok}; config round-trip exact: {config_ok}")
    assert ok
