"""Run loop, snapshot audit, convergence-study driver and built-in self-test."""
from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import oracle
from .config import RunConfig, load_config, make_initial, resolved, serialize_config
from .diagnostics import CsvSink, Monitor, Trajectory, energy, interpolant_eval, read_csv
from .errors import (
    GridMismatch,
    NonpositiveRadicand,
    NotConverged,
    RPositivityLost,
)
from .grid import Grid, read_field, write_field
from .stepper import SchemeState, apply_update_operator, h_field, step
from .tensor import ModelParams, p_of_Q, random_tensors, to_matrix

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_RADICAND = 4
EXIT_R_LOST = 5
EXIT_REFERENCE = 6

SNAPSHOT_DIR = "snapshots"
CSV_NAME = "diagnostics.csv"
CONFIG_NAME = "config.ini"


@dataclass
class RunResult:
    state: SchemeState
    records: list
    monitor: Monitor
    trajectory: Trajectory


def _snapshot_paths(out: Path, n: int):
    d = out / SNAPSHOT_DIR
    return d / f"Q_{n:08d}.qf", d / f"r_{n:08d}.qf"


def simulate(cfg: RunConfig, out=None, state=None, keep_trajectory=True) -> RunResult:
    """Execute ``floor(T/dt)`` steps with diagnostics.

    With ``out`` set, writes ``diagnostics.csv`` (flushed per row), the
    resolved ``config.ini`` and field snapshots every ``stride`` steps.
    Errors propagate after the partial outputs are on disk.
    """
    if state is None:
        state = make_initial(cfg)
    grid = state.grid
    monitor = Monitor(state)
    records = [monitor.first]
    traj = Trajectory(grid, cfg.dt, cfg.stride)
    sink = None
    if out is not None:
        out = Path(out)
        (out / SNAPSHOT_DIR).mkdir(parents=True, exist_ok=True)
        (out / CONFIG_NAME).write_text(serialize_config(resolved(cfg, state)))
        sink = CsvSink(out / CSV_NAME)
        sink.write(monitor.first)

    def keep(s):
        if keep_trajectory:
            traj.add(s)
        if out is not None and s.n % cfg.stride == 0:
            qp, rp = _snapshot_paths(out, s.n)
            write_field(qp, grid, s.Q)
            write_field(rp, grid, s.r)

    try:
        keep(state)
        for _ in range(cfg.steps):
            Pn = p_of_Q(state.Q, state.params)
            nxt, report = step(state, cfg.cg_tol, cfg.max_iter, cfg.abort_on_r_loss, Pn=Pn)
            rec = monitor.advance(state, nxt, Pn, report)
            records.append(rec)
            if sink:
                sink.write(rec)
            state = nxt
            keep(state)
    finally:
        if sink:
            sink.close()
    return RunResult(state, records, monitor, traj)


def run(cfg: RunConfig, out=None) -> int:
    """Run a configuration; returns a process exit status."""
    out = out or cfg.out or None
    t0 = time.perf_counter()
    try:
        res = simulate(cfg, out, keep_trajectory=False)
    except NonpositiveRadicand as exc:
        log.error("NonpositiveRadicand: %s", exc)
        return EXIT_RADICAND
    except NotConverged as exc:
        log.error("NotConverged: %s", exc)
        return EXIT_NOT_CONVERGED
    except RPositivityLost as exc:
        log.error("RPositivityLost: %s", exc)
        return EXIT_R_LOST
    last = res.records[-1]
    log.info(
        "%d steps in %.2fs: E %.6g -> %.6g, max V_n %.3g, sup W_n %.6g",
        last.n, time.perf_counter() - t0, res.records[0].E, last.E, last.Vn_max, res.monitor.W_sup,
    )
    return EXIT_OK


# -- audit ------------------------------------------------------------------


@dataclass
class AuditLine:
    name: str
    ok: bool
    detail: str

    def __str__(self):
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}: {self.detail}"


def audit(run_dir, rel_tol: float = 1e-9):
    """Re-verify a run from its snapshots: energy law, dissipation sum, structure.

    Needs every step on disk (stride 1); the run's ``config.ini`` supplies
    the model parameters.  Returns a list of :class:`AuditLine`.
    """
    run_dir = Path(run_dir)
    cfg = load_config(run_dir / CONFIG_NAME)
    lines = []
    if cfg.stride != 1:
        lines.append(AuditLine("stride", False, f"stride {cfg.stride} > 1: snapshot audit needs every step"))
        return lines
    params = cfg.params(cfg.A0)
    grid = None
    states = []
    for n in range(cfg.steps + 1):
        qp, rp = _snapshot_paths(run_dir, n)
        if not qp.exists():
            break
        g, Q = read_field(qp)
        g2, r = read_field(rp)
        if g != g2 or (grid is not None and g != grid):
            raise GridMismatch(f"snapshot {n} grid differs")
        grid = g
        states.append(SchemeState(grid, Q, r, params, cfg.dt, n, n * cfg.dt))
    if len(states) < 2:
        lines.append(AuditLine("snapshots", False, f"found {len(states)} snapshot(s); need at least 2"))
        return lines
    lines.append(AuditLine("snapshots", len(states) == cfg.steps + 1, f"{len(states)} of {cfg.steps + 1} present"))

    E = [energy(s) for s in states]
    E0 = E[0]
    worst_law = -math.inf
    H_sum = 0.0
    worst_sum = -math.inf
    for k in range(len(states) - 1):
        prev, nxt = states[k], states[k + 1]
        H = h_field(nxt, p_of_Q(prev.Q, params))
        dissip = params.M * cfg.dt * grid.inner(H, H)
        worst_law = max(worst_law, (E[k + 1] - E[k] + dissip) / E0)
        H_sum += grid.inner(H, H) * cfg.dt
        worst_sum = max(worst_sum, H_sum - 2.0 * E0)
    lines.append(AuditLine(
        "energy law", worst_law <= rel_tol,
        f"max (E^(n+1) - E^n + M||H||^2 dt)/E0 = {worst_law:.3e}",
    ))
    lines.append(AuditLine("dissipation sum", worst_sum <= rel_tol * E0, f"max sum ||H||^2 dt - 2E0 = {worst_sum:.3e}"))
    mats = to_matrix(np.stack([s.Q for s in states]))
    tr = float(np.max(np.abs(np.trace(mats, axis1=-2, axis2=-1))))
    asym = float(np.max(np.abs(mats - np.swapaxes(mats, -1, -2))))
    lines.append(AuditLine("trace-free/symmetric", tr <= 1e-14 and asym <= 1e-14, f"max|tr| = {tr:.1e}, max|M-M^T| = {asym:.1e}"))

    csv_path = run_dir / CSV_NAME
    if csv_path.exists():
        rows = read_csv(csv_path)
        gap = max(abs(r.E - e) for r, e in zip(rows, E))
        lines.append(AuditLine("csv energies", gap <= 1e-12 * E0, f"max |E_csv - E_snapshot| = {gap:.1e}"))
        bad_rows = [
            b.n for a, b in zip(rows, rows[1:]) if b.E - a.E + params.M * cfg.dt * b.H_norm_sq > rel_tol * E0
        ]
        lines.append(AuditLine("csv energy law", not bad_rows, f"{len(bad_rows)} violating rows"))
    traj = Trajectory(grid, cfg.dt)
    for s in states:
        traj.add(s)
    Qi, ri = interpolant_eval(traj, states[-1].t)
    lines.append(AuditLine(
        "interpolant nodes", bool(np.array_equal(Qi, states[-1].Q) and np.array_equal(ri, states[-1].r)),
        "Q_dt(t_N) reproduces the last snapshot",
    ))
    return lines


# -- study ------------------------------------------------------------------


def study(cfg: RunConfig, levels: int = 3, out=None, gate=True):
    """Convergence study on the configured problem.

    The configured ``dt`` is the finest level; coarser levels double it.
    """
    state = make_initial(cfg)
    problem = oracle.Problem(state.grid, state.params, state.Q, cfg.T, cfg.cg_tol, name="config")
    dts = [cfg.dt * 2 ** (levels - 1 - k) for k in range(levels)]
    res = oracle.run_convergence_study(problem, dts, gate=gate)
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        oracle.write_study_csv(out / "study.csv", res)
    return res


# -- selftest ---------------------------------------------------------------


def selftest():
    """Invariant checks on built-in problems; returns a list of :class:`AuditLine`."""
    lines = []
    rng = np.random.default_rng(1234)

    pts = random_tensors(rng, 1000)
    mats = to_matrix(pts)
    lines.append(AuditLine(
        "structure", bool(np.all(np.trace(mats, axis1=-2, axis2=-1) == 0) and np.all(mats == np.swapaxes(mats, -1, -2))),
        "reconstructed tensors are trace-free and symmetric",
    ))

    for bc in ("dirichlet", "neumann"):
        grid = Grid.uniform(24, 1.0, bc)
        f = grid.enforce_bc(random_tensors(rng, grid.shape))
        g = grid.enforce_bc(random_tensors(rng, grid.shape))
        sbp = abs(-grid.inner(grid.laplacian(f), f) - grid.gradient_norm_sq(f)) / grid.gradient_norm_sq(f)
        lines.append(AuditLine(f"summation by parts ({bc})", sbp <= 1e-12, f"relative gap {sbp:.1e}"))
        P = random_tensors(rng, grid.shape)
        p = ModelParams(-0.3, 1.0, 1.0, 0.01, 1.0, 1.0)
        Af = apply_update_operator(grid, f, P, p, 1e-2)
        Ag = apply_update_operator(grid, g, P, p, 1e-2)
        adj = abs(grid.inner(Af, g) - grid.inner(f, Ag)) / (grid.norm(Af) * grid.norm(g))
        coer = grid.inner(Af, f) - grid.inner(f, f)
        lines.append(AuditLine(f"update operator SPD ({bc})", adj <= 1e-12 and coer >= 0, f"adjointness gap {adj:.1e}"))

    pb = oracle.default_problem(n=32, T=0.05)
    state = pb.initial_state(1e-3)
    mon = Monitor(state)
    worst = 0.0
    for _ in range(pb.steps(1e-3)):
        Pn = p_of_Q(state.Q, pb.params)
        nxt, rep = step(state, Pn=Pn)
        rec = mon.advance(state, nxt, Pn, rep)
        worst = max(worst, abs(rec.dE_identity) / mon.E0)
        state = nxt
    lines.append(AuditLine("energy identity", worst <= 1e-9, f"max residual / E0 = {worst:.1e}"))
    lines.append(AuditLine("dissipation sum", mon.H_sum <= 2 * mon.E0 * (1 + 1e-8), f"{mon.H_sum:.3e} <= 2E0"))

    z = oracle.zero_problem()
    zs = z.initial_state(1e-2)
    zs1, _ = step(zs)
    lines.append(AuditLine(
        "stationary zero state", bool(np.all(zs1.Q == 0) and np.array_equal(zs1.r, zs.r)),
        "Q = 0, r = sqrt(A0) is a fixed point",
    ))
    return lines


def set_thread_limit():
    """Apply ``QTENSOR_IEQ_THREADS`` (0 = auto) to BLAS/OpenMP pools."""
    raw = os.environ.get("QTENSOR_IEQ_THREADS", "0").strip() or "0"
    try:
        k = int(raw)
    except ValueError:
        log.warning("ignoring QTENSOR_IEQ_THREADS=%r (not an integer)", raw)
        return None
    if k <= 0:
        return None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=k)
