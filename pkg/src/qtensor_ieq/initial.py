"""Initial Q-tensor fields."""
from __future__ import annotations

import numpy as np

from .grid import DIRICHLET, Grid
from .tensor import frobenius_norm, random_tensors, uniaxial

_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def director_vector(axis) -> tuple:
    if isinstance(axis, str):
        key = axis.strip().lower()
        if key in _AXES:
            return _AXES[key]
        axis = [float(v) for v in key.split(",")]
    v = np.asarray(axis, dtype=float)
    if v.shape != (3,) or not np.linalg.norm(v) > 0:
        raise ValueError(f"director must be x, y, z or a nonzero 3-vector, got {axis!r}")
    return tuple(v / np.linalg.norm(v))


def smooth_bump(grid: Grid, center, width) -> np.ndarray:
    """``exp(1 - 1/(1 - rho^2))`` inside ``rho < 1``, zero outside; peak value 1."""
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    rho2 = sum(((x - c) / width) ** 2 for x, c in zip(grid.coords(), center))
    out = np.zeros(grid.shape)
    inside = rho2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
    return out


def uniaxial_bump(grid: Grid, s=0.5, center=0.5, width=0.3, director="x") -> np.ndarray:
    """``s * bump(x) * (n n^T - I/3)``; vanishes on the boundary when the support is interior."""
    phi = smooth_bump(grid, center, width)
    return grid.enforce_bc(phi[..., None] * uniaxial(s, director_vector(director)))


def random_smooth(grid: Grid, seed=0, amplitude=0.1, modes=4) -> np.ndarray:
    """Random combination of the lowest ``modes`` eigenmodes per axis.

    Sine modes under Dirichlet, cosine modes under Neumann, so the field
    is smooth and honors the boundary condition; scaled so that
    ``max |Q| = amplitude``.
    """
    rng = np.random.default_rng(seed)
    field = grid.zeros()
    coords = grid.coords()
    basis = np.sin if grid.bc == DIRICHLET else np.cos
    for ks in np.ndindex(*(modes,) * grid.dim):
        shape = np.ones(grid.shape)
        for k, x, ext in zip(ks, coords, grid.extent):
            shape = shape * basis((k + 1) * np.pi * x / ext)
        coef = random_tensors(rng, ()) / (1.0 + sum(ks)) ** 2
        field += shape[..., None] * coef
    peak = float(np.max(frobenius_norm(field)))
    if peak > 0:
        field *= amplitude / peak
    return grid.enforce_bc(field)
