"""Per-step monitoring of the quantities the stability analysis controls.

The :class:`Monitor` is fed consecutive states by the run loop and emits a
:class:`DiagnosticsRecord` per step: the discrete energy and the residual
of the exact discrete energy identity, the dissipation sum, the drift of
the auxiliary variable away from ``r(Q)``, and the higher-order energy
``W_n``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import OutOfRange, StrideTooCoarse
from .grid import Grid
from .stepper import SchemeState, SolveReport, h_field
from .tensor import bulk_potential, r_of_Q

log = logging.getLogger(__name__)

CSV_HEADER = (
    "n,t,E,dE_identity,H_norm_sq,H_sum,Vn_max,Vn_l2,Dn_l2,Wn,laplQ_l2,grad_rP_l2,r_min,cg_iters"
).split(",")


@dataclass(frozen=True)
class DiagnosticsRecord:
    n: int
    t: float
    E: float
    dE_identity: float
    H_norm_sq: float
    H_sum: float
    Vn_max: float
    Vn_l2: float
    Dn_l2: float
    Wn: float
    laplQ_l2: float
    grad_rP_l2: float
    r_min: float
    cg_iters: int

    def as_row(self):
        return [v if isinstance(v, int) else format(v, ".17g") for v in astuple(self)]


def energy(state: SchemeState) -> float:
    """``(L/2) ||grad Q||^2 + (1/2) ||r||^2``."""
    g = state.grid
    return 0.5 * state.params.L * g.gradient_norm_sq(state.Q) + 0.5 * g.inner(state.r, state.r)


def landau_de_gennes_energy(grid: Grid, Q, params) -> float:
    """``(L/2) ||grad Q||^2 + integral of F_B(Q)`` with the same quadrature."""
    return 0.5 * params.L * grid.gradient_norm_sq(Q) + float(
        np.sum(grid.weights * bulk_potential(Q, params))
    )


def drift(state: SchemeState) -> np.ndarray:
    """Signed drift ``r^n - r(Q^n)``."""
    return state.r - r_of_Q(state.Q, state.params)


def drift_fields(state: SchemeState):
    """``(V, Dmag)``: ``|r^n - r(Q^n)|`` and the magnitude of its gradient."""
    d = drift(state)
    return np.abs(d), state.grid.gradient_magnitude(d)


def grad_rp_norm(state_next: SchemeState, Pn) -> float:
    """``||grad(r^{n+1} P(Q^n))||``."""
    g = state_next.grid
    return math.sqrt(g.gradient_norm_sq(state_next.r[..., None] * g.check(Pn)))


def energy_identity_residual(prev: SchemeState, nxt: SchemeState, H, E_prev=None, E_next=None) -> float:
    """``E^{n+1} - E^n + (L/2)||grad dQ||^2 + (1/2)||dr||^2 + M ||H||^2 dt``.

    Zero up to the linear-solver residual for every step of the scheme.
    """
    g, p = prev.grid, prev.params
    if E_prev is None:
        E_prev = energy(prev)
    if E_next is None:
        E_next = energy(nxt)
    dQ = nxt.Q - prev.Q
    dr = nxt.r - prev.r
    return (
        E_next
        - E_prev
        + 0.5 * p.L * g.gradient_norm_sq(dQ)
        + 0.5 * g.inner(dr, dr)
        + p.M * prev.dt * g.inner(H, H)
    )


class Monitor:
    """Running diagnostics for one trajectory.

    ``W_n`` is accumulated online: only the running sum of
    ``||grad(Q^{k+1} - Q^k)||^2 / dt`` is kept, never the history.
    """

    def __init__(self, state0: SchemeState):
        self.E0 = energy(state0)
        self.E = self.E0
        self.H_sum = 0.0
        self.grad_increment_sum = 0.0
        self.lapl_sum = 0.0
        self.W_sup = -math.inf
        self._flagged_w_dt = False
        self.first = self._record(state0, self.E0, 0.0, 0.0, math.nan, 0)

    def higher_energy(self, state: SchemeState, lap=None) -> float:
        """``W_n = (L/2)||lap Q^n||^2 + (1/2M) sum_k ||grad(Q^{k+1}-Q^k)/dt||^2 dt``."""
        if lap is None:
            lap = state.grid.norm(state.grid.laplacian(state.Q))
        return 0.5 * state.params.L * lap**2 + self.grad_increment_sum / (2.0 * state.params.M)

    def _record(self, state, E, dE, H_norm_sq, grad_rp, iters):
        g = state.grid
        d = drift(state)
        lap = g.norm(g.laplacian(state.Q))
        W = self.higher_energy(state, lap)
        self.W_sup = max(self.W_sup, W)
        if not self._flagged_w_dt and W * state.dt > 1.0:
            log.warning("W_n * dt = %.3g > 1 at step %d: dt may be too large for the H2 bound", W * state.dt, state.n)
            self._flagged_w_dt = True
        return DiagnosticsRecord(
            n=state.n,
            t=state.t,
            E=E,
            dE_identity=dE,
            H_norm_sq=H_norm_sq,
            H_sum=self.H_sum,
            Vn_max=float(np.max(np.abs(d))),
            Vn_l2=g.norm(d),
            Dn_l2=math.sqrt(g.gradient_norm_sq(d)),
            Wn=W,
            laplQ_l2=lap,
            grad_rP_l2=grad_rp,
            r_min=float(state.r.min()),
            cg_iters=int(iters),
        )

    def advance(self, prev: SchemeState, nxt: SchemeState, Pn, report: SolveReport) -> DiagnosticsRecord:
        g, dt = prev.grid, prev.dt
        H = h_field(nxt, Pn)
        E_next = energy(nxt)
        dE = energy_identity_residual(prev, nxt, H, self.E, E_next)
        H_norm_sq = g.inner(H, H)
        self.H_sum += H_norm_sq * dt
        if dt > 0:
            self.grad_increment_sum += g.gradient_norm_sq(nxt.Q - prev.Q) / dt
        rec = self._record(nxt, E_next, dE, H_norm_sq, grad_rp_norm(nxt, Pn), report.iterations)
        self.lapl_sum += rec.laplQ_l2**2 * dt
        self.E = E_next
        return rec


def write_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in records:
            w.writerow(rec.as_row())


class CsvSink:
    """Streams records to disk, flushing each row so aborted runs keep their output."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(CSV_HEADER)

    def write(self, rec: DiagnosticsRecord):
        self._w.writerow(rec.as_row())
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path):
    types = {f.name: f.type for f in fields(DiagnosticsRecord)}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                DiagnosticsRecord(**{k: int(v) if types[k] in (int, "int") else float(v) for k, v in row.items()})
            )
    return out


class Trajectory:
    """Snapshots ``(Q^n, r^n)`` kept every ``stride`` steps."""

    def __init__(self, grid: Grid, dt: float, stride: int = 1):
        if stride < 1:
            raise ValueError("stride must be >= 1")
        self.grid = grid
        self.dt = float(dt)
        self.stride = int(stride)
        self.Q = {}
        self.r = {}
        self.last = -1

    def add(self, state: SchemeState, force=False):
        self.last = max(self.last, state.n)
        if force or state.n % self.stride == 0:
            self.Q[state.n] = state.Q
            self.r[state.n] = state.r

    def steps(self):
        return sorted(self.Q)

    def at_step(self, n):
        return self.Q[n], self.r[n]

    @property
    def T(self):
        return self.last * self.dt


def interpolant_eval(traj: Trajectory, t: float):
    """Piecewise-linear-in-time ``(Q_dt(t), r_dt(t))`` from stored snapshots."""
    if traj.last < 0 or not (-1e-12 * max(traj.T, 1.0) <= t <= traj.T * (1 + 1e-12)):
        raise OutOfRange(f"t={t!r} outside [0, {traj.T!r}]")
    s = t / traj.dt
    n = int(round(s))
    if abs(s - n) <= 1e-9 * max(1.0, abs(s)):
        if n not in traj.Q:
            raise StrideTooCoarse(f"step {n} was not retained (stride {traj.stride})")
        return traj.Q[n].copy(), traj.r[n].copy()
    n = int(math.floor(s))
    if n not in traj.Q or n + 1 not in traj.Q:
        raise StrideTooCoarse(
            f"t={t!r} lies between steps {n} and {n + 1}; snapshots kept every {traj.stride} steps"
        )
    theta = s - n
    w_lo, w_hi = 1.0 - theta, theta
    Q = w_lo * traj.Q[n] + w_hi * traj.Q[n + 1]
    r = w_lo * traj.r[n] + w_hi * traj.r[n + 1]
    return Q, r


def interpolation_weights(t: float, n: int, dt: float):
    """``(alpha_{n+1}(t), alpha_n(t))``: weights on ``Q^n`` and ``Q^{n+1}``."""
    return ((n + 1) * dt - t) / dt, (t - n * dt) / dt
