"""Reference solutions and temporal convergence measurement.

No closed-form solution of the nonlinear flow is available, so the
"exact" trajectory is replaced by the same scheme run at a much finer
step, guarded by a dt-halving self-consistency gate.  A direct
semi-implicit discretization of the original (non-quadratized) flow
serves as an independent cross-check of the limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .diagnostics import Trajectory
from .errors import NotConverged, ReferenceUnconverged
from .grid import DIRICHLET, Grid
from .initial import uniaxial_bump
from .stepper import DEFAULT_TOL, SchemeState, apply_update_operator, cg_solve, step
from .tensor import ModelParams, default_A0, r_of_Q, s_of_Q


@dataclass(frozen=True)
class Problem:
    grid: Grid
    params: ModelParams
    Q0: np.ndarray
    T: float
    tol: float = DEFAULT_TOL
    name: str = ""

    def initial_state(self, dt: float) -> SchemeState:
        return SchemeState.initial(self.grid, self.Q0, self.params, dt)

    def steps(self, dt: float) -> int:
        k = self.T / dt
        if abs(k - round(k)) > 1e-8 * max(1.0, k):
            raise ValueError(f"T={self.T} is not a whole number of steps of dt={dt}")
        return int(round(k))


def default_problem(n=64, bc=DIRICHLET, T=0.5) -> Problem:
    """Desk-scale 1D problem: uniaxial bump under an isotropic-unstable bulk potential."""
    grid = Grid.uniform(n, 1.0, bc)
    Q0 = uniaxial_bump(grid, s=0.5, center=0.5, width=0.3, director="x")
    proto = ModelParams(a=-0.3, b=1.0, c=1.0, L=0.01, M=1.0)
    params = replace(proto, A0=default_A0(Q0, proto))
    return Problem(grid, params, Q0, T, name="default")


def linear_problem(n=64, T=0.5) -> Problem:
    """Nearly linear flow: ``b = 0``, ``c`` tiny, small positive ``a``."""
    grid = Grid.uniform(n, 1.0, DIRICHLET)
    Q0 = uniaxial_bump(grid, s=0.5, center=0.5, width=0.3)
    return Problem(grid, ModelParams(a=0.1, b=0.0, c=1e-8, L=0.01, M=1.0, A0=1.0), Q0, T, name="linear")


def zero_problem(n=32, T=0.1) -> Problem:
    grid = Grid.uniform(n, 1.0, DIRICHLET)
    return Problem(grid, ModelParams(a=-0.3, b=1.0, c=1.0, L=0.01, M=1.0, A0=1.0), grid.zeros(), T, name="zero")


def baseline_step(state: SchemeState, tol: float = DEFAULT_TOL, max_iter=None) -> SchemeState:
    """Semi-implicit step of the original flow, no auxiliary variable:

    ``(Q^{n+1} - Q^n)/dt = M (L lap Q^{n+1} - S(Q^n))``.

    ``r`` is reset to ``r(Q^{n+1})`` so the state stays self-describing.
    """
    grid, p, dt = state.grid, state.params, state.dt
    rhs = grid.enforce_bc(state.Q - (p.M * dt) * s_of_Q(state.Q, p))
    zero = grid.zeros()

    def op(X):
        return apply_update_operator(grid, X, zero, p, dt)

    Q, report = cg_solve(grid, op, rhs, tol, max_iter, x0=state.Q)
    if not report.converged:
        raise NotConverged(report)
    Q = grid.enforce_bc(Q)
    n = state.n + 1
    return replace(state, Q=Q, r=r_of_Q(Q, p), n=n, t=n * dt)


def integrate(problem: Problem, dt: float, stride: int = 1, scheme: str = "ieq") -> Trajectory:
    """Run to ``problem.T`` keeping every ``stride``-th step (and the last)."""
    n_steps = problem.steps(dt)
    state = problem.initial_state(dt)
    traj = Trajectory(problem.grid, dt, stride)
    traj.add(state)
    for _ in range(n_steps):
        if scheme == "ieq":
            state, _ = step(state, problem.tol)
        elif scheme == "baseline":
            state = baseline_step(state, problem.tol)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        traj.add(state, force=state.n == n_steps)
    return traj


def fine_reference(problem: Problem, dt_ref: float, snapshot_dt: Optional[float] = None) -> Trajectory:
    """IEQ trajectory at ``dt_ref`` retained at multiples of ``snapshot_dt``."""
    stride = 1 if snapshot_dt is None else _ratio(snapshot_dt, dt_ref)
    return integrate(problem, dt_ref, stride)


def _ratio(big, small):
    k = big / small
    if abs(k - round(k)) > 1e-8 * k or round(k) < 1:
        raise ValueError(f"{big} is not an integer multiple of {small}")
    return int(round(k))


def fit_order(dts, errs):
    """Least-squares slope of ``log err`` against ``log dt`` and RMS log residual."""
    dts = np.asarray(dts, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if np.any(errs <= 0):
        return math.nan, math.nan
    x, y = np.log(dts), np.log(errs)
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return float(slope), resid


@dataclass
class ConvergenceStudy:
    dts: list
    err_final_l2: list
    err_h2_sum: list
    fitted_order: float
    fit_residual: float
    dt_ref: float
    ref_gate_diff: float
    r_consistency: list = field(default_factory=list)
    reference: str = ""

    @property
    def running_orders(self):
        out = [math.nan]
        for k in range(1, len(self.dts)):
            e0, e1 = self.err_final_l2[k - 1], self.err_final_l2[k]
            ok = e0 > 0 and e1 > 0
            out.append(math.log(e0 / e1) / math.log(self.dts[k - 1] / self.dts[k]) if ok else math.nan)
        return out


def run_convergence_study(problem: Problem, dts, dt_ref: Optional[float] = None, gate: bool = True) -> ConvergenceStudy:
    """Errors of the IEQ scheme at each ``dt`` against a fine reference.

    ``dts`` must be integer multiples of the smallest one; ``dt_ref``
    defaults to ``min(dts) / 8``.  With ``gate`` the reference is rerun at
    ``dt_ref / 2`` and must move by less than a quarter of the smallest
    study error, else :class:`ReferenceUnconverged`.
    """
    dts = sorted((float(d) for d in dts), reverse=True)
    if len(dts) < 3:
        raise ValueError("a convergence study needs at least 3 levels")
    dt_min = dts[-1]
    if dt_ref is None:
        dt_ref = dt_min / 8.0
    if dt_ref > dt_min / 8.0 * (1 + 1e-12):
        raise ValueError("dt_ref must be at most min(dts)/8")
    grid = problem.grid
    ref = fine_reference(problem, dt_ref, dt_min)
    k_ref = _ratio(dt_min, dt_ref)

    err_final, err_h2, r_cons = [], [], []
    for dt in dts:
        traj = integrate(problem, dt)
        m = _ratio(dt, dt_min)
        n_steps = problem.steps(dt)
        last_Q = traj.Q[n_steps]
        ref_last = ref.Q[n_steps * m * k_ref]
        err_final.append(grid.norm(last_Q - ref_last))
        h2 = 0.0
        for j in range(1, n_steps + 1):
            diff = traj.Q[j] - ref.Q[j * m * k_ref]
            h2 += grid.norm(grid.laplacian(diff)) ** 2 * dt
        err_h2.append(h2)
        r_cons.append(grid.norm(traj.r[n_steps] - r_of_Q(last_Q, problem.params)))

    gate_diff = math.nan
    if gate:
        half = fine_reference(problem, dt_ref / 2.0, problem.T)
        gate_diff = grid.norm(half.Q[half.last] - ref.Q[ref.last])
        smallest = min(err_final)
        if not (gate_diff < smallest / 4.0 or (gate_diff == 0.0 and smallest == 0.0)):
            raise ReferenceUnconverged(
                f"reference moved by {gate_diff:.3e} under dt halving; "
                f"needs < {smallest / 4.0:.3e} (a quarter of the smallest study error)"
            )
    order, resid = fit_order(dts, err_final)
    return ConvergenceStudy(
        dts, err_final, err_h2, order, resid, dt_ref, gate_diff, r_cons,
        reference=f"IEQ at dt_ref={dt_ref!r}",
    )


def baseline_agreement(problem: Problem, dts):
    """Final-time ``||Q_IEQ(T) - Q_baseline(T)||`` per level and its fitted order."""
    diffs = []
    for dt in dts:
        a = integrate(problem, dt, scheme="ieq")
        b = integrate(problem, dt, scheme="baseline")
        diffs.append(problem.grid.norm(a.Q[a.last] - b.Q[b.last]))
    order, resid = fit_order(dts, diffs)
    return diffs, order, resid


def write_study_csv(path, study: ConvergenceStudy) -> None:
    with open(path, "w") as fh:
        fh.write("level,dt,err_final_l2,err_h2_sum,order_running\n")
        rows = zip(study.dts, study.err_final_l2, study.err_h2_sum, study.running_orders)
        for k, (dt, ef, eh, o) in enumerate(rows):
            fh.write(",".join([str(k)] + [format(v, ".17g") for v in (dt, ef, eh, o)]) + "\n")
        fh.write(f"fitted_order={study.fitted_order!r} fit_residual={study.fit_residual!r}\n")
