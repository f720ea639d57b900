"""One linear, energy-stable IEQ time step for the Q-tensor gradient flow.

Given ``(Q^n, r^n)`` the step solves

    Q^{n+1} - M L dt lap Q^{n+1} + M dt (P^n : Q^{n+1}) P^n
        = Q^n - M dt r^n P^n + M dt (P^n : Q^n) P^n,        P^n = P(Q^n),

with matrix-free conjugate gradients, then sets
``r^{n+1} = r^n + P^n : (Q^{n+1} - Q^n)`` node by node.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import NotConverged, RPositivityLost, RPositivityWarning
from .grid import Grid
from .tensor import ModelParams, frobenius_dot, p_of_Q, r_of_Q

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class SchemeState:
    """One time level ``(Q^n, r^n)`` of the coupled system."""

    grid: Grid
    Q: np.ndarray
    r: np.ndarray
    params: ModelParams
    dt: float
    n: int = 0
    t: float = 0.0

    def __post_init__(self):
        if not self.dt >= 0:
            raise ValueError(f"dt must be >= 0, got {self.dt}")
        if self.Q.shape != self.grid.shape + (5,) or self.r.shape != self.grid.shape:
            self.grid.check(self.Q)
            self.grid.check(self.r)
            raise ValueError("Q must be a tensor field and r a scalar field")

    @classmethod
    def initial(cls, grid: Grid, Q0, params: ModelParams, dt: float) -> "SchemeState":
        """State at ``n = 0`` with ``r^0 = r(Q^0)`` pointwise."""
        Q0 = grid.enforce_bc(Q0)
        return cls(grid, Q0, r_of_Q(Q0, params), params, float(dt))


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    converged: bool


def apply_update_operator(grid: Grid, X, Pn, params: ModelParams, dt: float) -> np.ndarray:
    """``X - M L dt lap X + M dt (Pn : X) Pn``; SPD in the grid inner product."""
    X = grid.check(X)
    Pn = grid.check(Pn)
    md = params.M * dt
    out = X - (md * params.L) * grid.laplacian(X)
    out += (md * frobenius_dot(Pn, X))[..., None] * Pn
    return out


def build_rhs(state: SchemeState, Pn=None) -> np.ndarray:
    """``Q^n - M dt r^n P^n + M dt (P^n : Q^n) P^n``."""
    p = state.params
    if Pn is None:
        Pn = p_of_Q(state.Q, p)
    md = p.M * state.dt
    coef = md * (frobenius_dot(Pn, state.Q) - state.r)
    return state.grid.enforce_bc(state.Q + coef[..., None] * Pn)


def cg_solve(
    grid: Grid,
    operator: Callable[[np.ndarray], np.ndarray],
    rhs,
    tol: float = DEFAULT_TOL,
    max_iter: Optional[int] = None,
    x0=None,
):
    """Conjugate gradients in the grid's weighted L2 inner product.

    Returns ``(x, report)``; never raises on non-convergence, the caller
    inspects ``report.converged``.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    rhs = grid.check(rhs)
    if max_iter is None:
        max_iter = 10 * grid.size
    bnorm = grid.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs), SolveReport(0, 0.0, True)

    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    res = rhs - operator(x) if x0 is not None else rhs.copy()
    rr = grid.inner(res, res)
    target = (tol * bnorm) ** 2
    p = res.copy()
    it = 0
    while True:
        if rr <= target or it >= max_iter:
            # the recurrence residual drifts from the true one; confirm, else restart
            res = rhs - operator(x)
            rr = grid.inner(res, res)
            if rr <= target or it >= max_iter:
                break
            p = res.copy()
        Ap = operator(p)
        alpha = rr / grid.inner(p, Ap)
        x += alpha * p
        res -= alpha * Ap
        rr_new = grid.inner(res, res)
        p = res + (rr_new / rr) * p
        rr = rr_new
        it += 1
    relres = float(np.sqrt(rr)) / bnorm
    return x, SolveReport(it, relres, relres <= tol)


def step(
    state: SchemeState,
    tol: float = DEFAULT_TOL,
    max_iter: Optional[int] = None,
    abort_on_r_loss: bool = False,
    Pn=None,
):
    """Advance one step; returns ``(next_state, report)``.

    Raises :class:`NotConverged` if CG fails.  Loss of positivity of ``r``
    is warned about, or raised as :class:`RPositivityLost` when
    ``abort_on_r_loss`` is set.
    """
    grid, p, dt = state.grid, state.params, state.dt
    if Pn is None:
        Pn = p_of_Q(state.Q, p)
    rhs = build_rhs(state, Pn)

    def op(X):
        return apply_update_operator(grid, X, Pn, p, dt)

    Q_next, report = cg_solve(grid, op, rhs, tol, max_iter, x0=state.Q)
    if not report.converged:
        raise NotConverged(report)
    Q_next = grid.enforce_bc(Q_next)
    r_next = state.r + frobenius_dot(Pn, Q_next - state.Q)
    n = state.n + 1
    r_min = float(r_next.min())
    if not r_min > 0:
        if abort_on_r_loss:
            raise RPositivityLost(n, r_min)
        warnings.warn(str(RPositivityLost(n, r_min)), RPositivityWarning, stacklevel=2)
    return replace(state, Q=Q_next, r=r_next, n=n, t=n * dt), report


def h_field(state_next: SchemeState, Pn) -> np.ndarray:
    """``H^{n+1} = L lap Q^{n+1} - r^{n+1} P(Q^n)``."""
    grid = state_next.grid
    H = state_next.params.L * grid.laplacian(state_next.Q) - state_next.r[..., None] * grid.check(Pn)
    return grid.enforce_bc(H)
