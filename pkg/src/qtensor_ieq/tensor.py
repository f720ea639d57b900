"""Pointwise algebra of symmetric trace-free 3x3 tensors.

A Q-tensor is stored as its five independent coefficients
``(q11, q12, q13, q22, q23)`` in the last axis of an array; ``q33`` is
always ``-(q11 + q22)``.  Symmetry and zero trace therefore hold by
construction, for single tensors (shape ``(5,)``) and for whole fields
(shape ``grid.shape + (5,)``) alike.  Every function below is vectorized
over the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonpositiveRadicand

NCOMP = 5
COMPONENTS = ("q11", "q12", "q13", "q22", "q23")
_ROWS = np.array([0, 0, 0, 1, 1])
_COLS = np.array([0, 1, 2, 1, 2])


@dataclass(frozen=True)
class ModelParams:
    """Landau-de Gennes coefficients, elastic constant, mobility and shift.

    ``A0`` may be zero so that an inadequate shift is reported by the
    radicand guard at run time rather than rejected up front.
    """

    a: float
    b: float
    c: float
    L: float = 1.0
    M: float = 1.0
    A0: float = 1.0

    def __post_init__(self):
        bad = self.violations()
        if bad:
            raise ValueError("; ".join(f"{k}: {m}" for k, m in bad))

    def violations(self):
        out = []
        vals = {k: getattr(self, k) for k in ("a", "b", "c", "L", "M", "A0")}
        for k, v in vals.items():
            if not np.isfinite(v):
                out.append((k, "must be finite"))
        if not self.c > 0:
            out.append(("c", "bulk potential is unbounded below unless c > 0"))
        if not self.L > 0:
            out.append(("L", "elastic constant must be > 0"))
        if not self.M > 0:
            out.append(("M", "mobility must be > 0"))
        if not self.A0 >= 0:
            out.append(("A0", "quadratization shift must be >= 0"))
        return out


def as_coeffs(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1:] != (NCOMP,):
        raise ValueError(f"expected trailing axis of length 5, got shape {q.shape}")
    return q


def to_matrix(q) -> np.ndarray:
    """Reconstruct full ``(..., 3, 3)`` matrices from coefficients."""
    q = as_coeffs(q)
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = q[..., 0]
    m[..., 0, 1] = m[..., 1, 0] = q[..., 1]
    m[..., 0, 2] = m[..., 2, 0] = q[..., 2]
    m[..., 1, 1] = q[..., 3]
    m[..., 1, 2] = m[..., 2, 1] = q[..., 4]
    m[..., 2, 2] = -(q[..., 0] + q[..., 3])
    return m


def from_matrix(m) -> np.ndarray:
    """Coefficients of the symmetric trace-free part of ``m``."""
    m = np.asarray(m, dtype=float)
    sym = 0.5 * (m + np.swapaxes(m, -1, -2))
    tr = np.trace(sym, axis1=-2, axis2=-1)
    sym = sym - tr[..., None, None] * np.eye(3) / 3.0
    return sym[..., _ROWS, _COLS]


def uniaxial(s, director=(1.0, 0.0, 0.0)) -> np.ndarray:
    """``s (n n^T - I/3)`` for a (normalized) director ``n``."""
    n = np.asarray(director, dtype=float)
    n = n / np.linalg.norm(n)
    base = from_matrix(np.outer(n, n))
    return np.multiply.outer(np.asarray(s, dtype=float), base)


def frobenius_dot(A, B) -> np.ndarray:
    """``sum_ij A_ij B_ij`` of the reconstructed matrices."""
    A = as_coeffs(A)
    B = as_coeffs(B)
    a11, a12, a13, a22, a23 = np.moveaxis(A, -1, 0)
    b11, b12, b13, b22, b23 = np.moveaxis(B, -1, 0)
    return (
        2.0 * (a11 * b11 + a22 * b22 + a12 * b12 + a13 * b13 + a23 * b23)
        + (a11 * b22 + a22 * b11)  # grouped so the result is exactly symmetric in A, B
    )


def frobenius_norm(q) -> np.ndarray:
    return np.sqrt(frobenius_dot(q, q))


def deviatoric_square(q) -> np.ndarray:
    """Coefficients of ``Q^2 - tr(Q^2) I / 3``."""
    q = as_coeffs(q)
    q11, q12, q13, q22, q23 = np.moveaxis(q, -1, 0)
    q33 = -(q11 + q22)
    s11 = q11 * q11 + q12 * q12 + q13 * q13
    s12 = q11 * q12 + q12 * q22 + q13 * q23
    s13 = q11 * q13 + q12 * q23 + q13 * q33
    s22 = q12 * q12 + q22 * q22 + q23 * q23
    s23 = q12 * q13 + q22 * q23 + q23 * q33
    s33 = q13 * q13 + q23 * q23 + q33 * q33
    third = (s11 + s22 + s33) / 3.0
    return np.stack([s11 - third, s12, s13, s22 - third, s23], axis=-1)


def trace_sq(q) -> np.ndarray:
    return frobenius_dot(q, q)


def trace_cube(q) -> np.ndarray:
    # tr(Q^3) = dev(Q^2) : Q because Q is trace-free
    return frobenius_dot(deviatoric_square(q), q)


def bulk_potential(q, p: ModelParams) -> np.ndarray:
    t2 = trace_sq(q)
    t3 = trace_cube(q)
    return 0.5 * p.a * t2 - p.b / 3.0 * t3 + 0.25 * p.c * t2 * t2


def s_of_Q(q, p: ModelParams) -> np.ndarray:
    """Bulk variational derivative ``aQ - b(Q^2 - tr(Q^2)I/3) + c tr(Q^2) Q``."""
    q = as_coeffs(q)
    t2 = trace_sq(q)
    return (p.a + p.c * t2)[..., None] * q - p.b * deviatoric_square(q)


def radicand(q, p: ModelParams) -> np.ndarray:
    return 2.0 * bulk_potential(q, p) + p.A0


def r_of_Q(q, p: ModelParams) -> np.ndarray:
    """Auxiliary variable ``sqrt(2 F_B(Q) + A0)``; raises if the radicand is not positive."""
    rad = radicand(q, p)
    bad = ~(rad > 0)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(np.atleast_1d(bad))[0])
        val = float(np.atleast_1d(rad)[idx])
        raise NonpositiveRadicand(
            f"2*F_B(Q) + A0 = {val!r} <= 0 at index {idx} (A0 = {p.A0!r} is too small)",
            index=idx,
            value=val,
        )
    return np.sqrt(rad)


def p_of_Q(q, p: ModelParams) -> np.ndarray:
    """``S(Q) / r(Q)``, the derivative of ``r`` with respect to ``Q``."""
    return s_of_Q(q, p) / r_of_Q(q, p)[..., None]


def taylor_remainder(qa, qb, p: ModelParams) -> np.ndarray:
    """``r(Qb) - r(Qa) - P(Qa):(Qb - Qa)``."""
    qa = as_coeffs(qa)
    qb = as_coeffs(qb)
    return r_of_Q(qb, p) - r_of_Q(qa, p) - frobenius_dot(p_of_Q(qa, p), qb - qa)


def random_tensors(rng: np.random.Generator, size, scale=1.0) -> np.ndarray:
    """Random trace-free symmetric tensors from Gaussian 3x3 matrices."""
    size = (size,) if np.isscalar(size) else tuple(size)
    return scale * from_matrix(rng.standard_normal(size + (3, 3)))


def min_bulk_potential(p: ModelParams, radius: float, samples: int = 20000, seed: int = 0) -> float:
    """Sampled minimum of ``F_B`` over the Frobenius ball of given radius.

    For fixed ``|Q|`` the extremes of ``tr(Q^3)`` are uniaxial, so a dense
    sweep of the uniaxial line carries the estimate; random samples in
    the ball are added as a guard.
    """
    if radius <= 0:
        return 0.0
    smax = radius / np.sqrt(2.0 / 3.0)
    line = uniaxial(np.linspace(-smax, smax, 4001))
    rng = np.random.default_rng(seed)
    dirs = random_tensors(rng, samples)
    dirs /= frobenius_norm(dirs)[:, None]
    radii = radius * rng.random(samples) ** (1.0 / NCOMP)
    pts = np.concatenate([line, dirs * radii[:, None]])
    return float(np.min(bulk_potential(pts, p)))


def default_A0(q0, p: ModelParams) -> float:
    """``1 + max(0, -2 min F_B)`` over a ball of radius ``2 max |Q0|``."""
    q0 = as_coeffs(q0)
    radius = 2.0 * float(np.max(frobenius_norm(q0), initial=0.0))
    return 1.0 + max(0.0, -2.0 * min_bulk_potential(p, radius))
