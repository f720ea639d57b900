"""Uniform node-centred grids and second-order finite-difference operators.

Fields are plain numpy arrays: a scalar field has shape ``grid.shape`` and
a Q-tensor field has shape ``grid.shape + (5,)``.  Nodes sit at ``i * h``
for ``i = 0..n`` on every axis, so an axis with ``n`` cells has ``n + 1``
nodes.

The Laplacian, the forward-difference gradient and the trapezoidal
volume weights are matched so that the discrete Green identity

    -<lap f, g> = sum over edges of weight * (D f) : (D g)

holds to rounding for fields honoring the boundary condition.  The
energy law of the time stepper relies on this.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridMismatch
from .tensor import NCOMP, frobenius_dot

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
BCS = (DIRICHLET, NEUMANN)


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n[k]`` cells of width ``h[k]`` along axis ``k``."""

    n: tuple
    h: tuple
    bc: str = DIRICHLET

    def __post_init__(self):
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        h = tuple(float(v) for v in np.atleast_1d(self.h))
        if len(h) == 1 and len(n) > 1:
            h = h * len(n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "h", h)
        if not 1 <= len(n) <= 3:
            raise ValueError(f"dim must be 1, 2 or 3, got {len(n)}")
        if len(h) != len(n):
            raise ValueError("n and h must have the same length")
        if any(v < 2 for v in n):
            raise ValueError(f"need at least 2 cells per axis, got n={n}")
        if not all(v > 0 and np.isfinite(v) for v in h):
            raise ValueError(f"mesh spacing must be positive, got h={h}")
        if self.bc not in BCS:
            raise ValueError(f"bc must be one of {BCS}, got {self.bc!r}")
        object.__setattr__(self, "_weights", self._make_weights())

    @classmethod
    def uniform(cls, n, extent=1.0, bc=DIRICHLET, dim=None):
        n = tuple(np.atleast_1d(n))
        if dim is not None and len(n) == 1:
            n = n * dim
        extent = np.broadcast_to(np.asarray(extent, dtype=float), (len(n),))
        return cls(n, tuple(float(e) / int(k) for e, k in zip(extent, n)), bc)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple:
        return tuple(k + 1 for k in self.n)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def extent(self) -> tuple:
        return tuple(k * hk for k, hk in zip(self.n, self.h))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extent))

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def coords(self):
        """Node coordinates, one broadcastable array per axis (``ij`` indexing)."""
        axes = [hk * np.arange(k + 1) for k, hk in zip(self.n, self.h)]
        return np.meshgrid(*axes, indexing="ij")

    def _axis_weights(self, k):
        w = np.full(self.n[k] + 1, self.h[k])
        w[0] = w[-1] = 0.5 * self.h[k]
        return w

    def _make_weights(self):
        w = np.ones(())
        for k in range(self.dim):
            w = np.multiply.outer(w, self._axis_weights(k))
        return w

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[k] = 0
            mask[tuple(idx)] = True
            idx[k] = -1
            mask[tuple(idx)] = True
        return mask

    # -- field checks -------------------------------------------------------

    def check(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape and f.shape != self.shape + (NCOMP,):
            raise GridMismatch(
                f"field of shape {f.shape} does not live on grid with node shape {self.shape}"
            )
        return f

    def zeros(self, tensor=True) -> np.ndarray:
        return np.zeros(self.shape + ((NCOMP,) if tensor else ()))

    def enforce_bc(self, f) -> np.ndarray:
        """Copy of ``f`` with Dirichlet boundary nodes zeroed (no-op for Neumann)."""
        f = np.array(self.check(f), dtype=float)
        if self.bc == DIRICHLET:
            f[self.boundary_mask()] = 0.0
        return f

    # -- operators ----------------------------------------------------------

    def laplacian(self, f) -> np.ndarray:
        """Componentwise 3-point Laplacian summed over axes.

        Neumann uses even ghost reflection (``f[-1] = f[1]``); Dirichlet
        leaves the boundary nodes at zero.
        """
        f = self.check(f)
        out = np.zeros_like(f)
        for k in range(self.dim):
            inv = 1.0 / self.h[k] ** 2
            fk = np.moveaxis(f, k, 0)
            ok = np.moveaxis(out, k, 0)
            ok[1:-1] += (fk[2:] - 2.0 * fk[1:-1] + fk[:-2]) * inv
            if self.bc == NEUMANN:
                ok[0] += 2.0 * (fk[1] - fk[0]) * inv
                ok[-1] += 2.0 * (fk[-2] - fk[-1]) * inv
        if self.bc == DIRICHLET:
            out[self.boundary_mask()] = 0.0
        return out

    def forward_differences(self, f):
        """Forward differences along each axis (one array per axis, edges only)."""
        f = self.check(f)
        return [np.diff(f, axis=k) / self.h[k] for k in range(self.dim)]

    def _edge_weights(self, k):
        w = np.ones(())
        for j in range(self.dim):
            wj = np.full(self.n[j], self.h[j]) if j == k else self._axis_weights(j)
            w = np.multiply.outer(w, wj)
        return w

    def gradient_norm_sq(self, f) -> float:
        """Discrete ``||grad f||^2`` from forward differences."""
        f = self.check(f)
        total = 0.0
        for k, d in enumerate(self.forward_differences(f)):
            total += float(np.sum(self._edge_weights(k) * _pointwise(self.dim, d, d)))
        return total

    def gradient_magnitude(self, f) -> np.ndarray:
        """Pointwise Euclidean magnitude of the forward-difference gradient.

        Each edge difference is attributed to its left node; the last node
        on an axis reuses the last edge.
        """
        f = self.check(f)
        mag2 = np.zeros(self.shape)
        for k, d in enumerate(self.forward_differences(f)):
            dk = np.moveaxis(d, k, 0)
            node = np.concatenate([dk, dk[-1:]], axis=0)
            mag2 += np.moveaxis(_pointwise(self.dim, node, node), 0, k)
        return np.sqrt(mag2)

    def inner(self, f, g) -> float:
        """Volume-weighted L2 inner product (Frobenius for tensor fields)."""
        f = self.check(f)
        g = self.check(g)
        if f.shape != g.shape:
            raise GridMismatch(f"cannot pair fields of shapes {f.shape} and {g.shape}")
        return float(np.sum(self._weights * _pointwise(self.dim, f, g)))

    def norm(self, f) -> float:
        return float(np.sqrt(max(self.inner(f, f), 0.0)))

    def header(self) -> str:
        def join(vals, fmt):
            return ",".join(fmt(v) for v in vals)

        return (
            f"qfield v1 dim={self.dim} n={join(self.n, str)} "
            f"h={join(self.h, lambda v: format(v, '.17g'))} bc={self.bc}"
        )

    @classmethod
    def from_header(cls, line: str) -> "Grid":
        parts = line.split()
        if len(parts) < 2 or parts[0] != "qfield" or parts[1] != "v1":
            raise ValueError(f"not a qfield v1 header: {line!r}")
        kv = dict(p.split("=", 1) for p in parts[2:])
        n = tuple(int(v) for v in kv["n"].split(","))
        h = tuple(float(v) for v in kv["h"].split(","))
        grid = cls(n, h, kv["bc"])
        if grid.dim != int(kv["dim"]):
            raise ValueError(f"header dim={kv['dim']} disagrees with n={kv['n']}")
        return grid


def _pointwise(dim, f, g):
    if f.ndim > dim:
        return frobenius_dot(f, g)
    return f * g


def write_field(path, grid: Grid, f) -> None:
    """Write a snapshot: header line then one row per node in C order."""
    f = grid.check(f)
    rows = f.reshape(grid.size, -1)
    with open(path, "w") as fh:
        fh.write(grid.header() + "\n")
        for row in rows:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def read_field(path):
    """Inverse of :func:`write_field`; returns ``(grid, field)``."""
    path = Path(path)
    with open(path) as fh:
        grid = Grid.from_header(fh.readline())
        data = np.loadtxt(fh, ndmin=2, dtype=float)
    if data.shape[0] != grid.size or data.shape[1] not in (1, NCOMP):
        raise GridMismatch(f"{path}: got {data.shape} values for {grid.size} nodes")
    if data.shape[1] == 1:
        return grid, data.reshape(grid.shape)
    return grid, data.reshape(grid.shape + (NCOMP,))
