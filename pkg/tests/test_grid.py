import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtensor_ieq.errors import GridMismatch
from qtensor_ieq.grid import Grid, read_field, write_field
from qtensor_ieq.tensor import random_tensors


def random_field(grid, rng, tensor=True):
    f = random_tensors(rng, grid.shape) if tensor else rng.standard_normal(grid.shape)
    return grid.enforce_bc(f)


GRIDS = [
    Grid.uniform(16, 1.0, bc) for bc in ("dirichlet", "neumann")
] + [
    Grid.uniform((8, 12), (1.0, 1.5), bc) for bc in ("dirichlet", "neumann")
] + [
    Grid.uniform((5, 6, 7), 1.0, bc) for bc in ("dirichlet", "neumann")
]
GRID_IDS = [f"{g.dim}d-{g.bc}" for g in GRIDS]


class TestConstruction:
    def test_spacing_from_extent(self):
        g = Grid.uniform((4, 8), (2.0, 1.0))
        assert g.h == (0.5, 0.125)
        assert g.shape == (5, 9)
        assert g.extent == (2.0, 1.0)

    def test_scalar_n_with_dim(self):
        assert Grid.uniform(6, 1.0, dim=3).shape == (7, 7, 7)

    @pytest.mark.parametrize("kw", [dict(n=1), dict(n=4, bc="periodic"), dict(n=(2, 2, 2, 2))])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            Grid.uniform(**kw)

    def test_weights_sum_to_measure(self):
        for g in GRIDS:
            assert g.weights.sum() == pytest.approx(g.measure, rel=1e-14)


class TestLaplacian:
    def test_constant_neumann_is_zero(self):
        for g in GRIDS:
            if g.bc == "neumann":
                f = np.full(g.shape + (5,), 0.7)
                assert np.all(g.laplacian(f) == 0.0)

    def test_quadratic_exact_in_interior(self):
        g = Grid.uniform(8, 1.0, "neumann")
        (x,) = g.coords()
        f = np.repeat((x**2)[:, None], 5, axis=1)
        np.testing.assert_allclose(g.laplacian(f)[1:-1], 2.0, rtol=1e-12)

    def test_sin_second_order(self):
        hs, errs = [], []
        for n in (32, 64, 128):
            g = Grid.uniform(n, 1.0, "dirichlet")
            (x,) = g.coords()
            f = np.sin(np.pi * x)
            err = g.laplacian(f) + np.pi**2 * f
            hs.append(g.h[0])
            errs.append(np.max(np.abs(err[1:-1])))
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1)

    def test_dirichlet_boundary_stays_zero(self):
        g = GRIDS[2]
        out = g.laplacian(random_field(g, np.random.default_rng(0)))
        assert np.all(out[g.boundary_mask()] == 0.0)

    def test_mismatch(self):
        g = Grid.uniform(8)
        with pytest.raises(GridMismatch):
            g.laplacian(np.zeros((8, 5)))


@pytest.mark.parametrize("g", GRIDS, ids=GRID_IDS)
class TestDuality:
    def test_self_adjoint(self, g):
        rng = np.random.default_rng(1)
        for _ in range(5):
            f, h = random_field(g, rng), random_field(g, rng)
            gap = abs(g.inner(g.laplacian(f), h) - g.inner(f, g.laplacian(h)))
            # the operator norm scales like 1/h^2; measure against that
            scale = g.norm(g.laplacian(f)) * g.norm(h) + g.norm(f) * g.norm(g.laplacian(h))
            assert gap <= 1e-12 * scale

    def test_negative_semidefinite(self, g):
        rng = np.random.default_rng(2)
        for tensor in (True, False):
            f = random_field(g, rng, tensor)
            assert -g.inner(g.laplacian(f), f) > 0

    def test_summation_by_parts(self, g):
        rng = np.random.default_rng(3)
        for tensor in (True, False):
            f = random_field(g, rng, tensor)
            lhs = -g.inner(g.laplacian(f), f)
            assert lhs == pytest.approx(g.gradient_norm_sq(f), rel=1e-12)


class TestGradient:
    def test_zero(self):
        assert Grid.uniform(10).gradient_norm_sq(np.zeros((11, 5))) == 0.0

    def test_constant_neumann(self):
        g = Grid.uniform((4, 5), 1.0, "neumann")
        assert g.gradient_norm_sq(np.full(g.shape + (5,), 3.0)) == 0.0

    @pytest.mark.parametrize("n", [8, 32, 128])
    def test_ramp(self, n):
        g = Grid.uniform(n, 1.0, "neumann")
        (x,) = g.coords()
        s = 2.5
        assert g.gradient_norm_sq(s * x) == pytest.approx(s**2, rel=1e-13)

    def test_magnitude_of_ramp(self):
        g = Grid.uniform(10, 1.0, "neumann")
        (x,) = g.coords()
        np.testing.assert_allclose(g.gradient_magnitude(3 * x), 3.0, rtol=1e-13)


class TestInner:
    def test_two_cells_neumann(self):
        g = Grid.uniform(2, 1.0, "neumann")
        assert g.inner(np.ones(3), np.ones(3)) == pytest.approx(1.0, rel=1e-15)

    def test_definite(self):
        g = GRIDS[3]
        rng = np.random.default_rng(4)
        f = random_field(g, rng)
        assert g.inner(f, f) > 0
        assert g.inner(g.zeros(), g.zeros()) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetric(self, seed):
        g = Grid.uniform((6, 5), 1.0, "neumann")
        rng = np.random.default_rng(seed)
        f, h = random_field(g, rng), random_field(g, rng)
        assert g.inner(f, h) == pytest.approx(g.inner(h, f), rel=1e-15, abs=1e-300)

    def test_shape_mismatch(self):
        g = Grid.uniform(4)
        with pytest.raises(GridMismatch):
            g.inner(g.zeros(), g.zeros(tensor=False))


class TestFieldFile:
    @pytest.mark.parametrize("g", GRIDS, ids=GRID_IDS)
    def test_round_trip_bit_exact(self, g, tmp_path):
        rng = np.random.default_rng(5)
        for tensor in (True, False):
            f = random_field(g, rng, tensor) * 10.0 ** rng.integers(-20, 20)
            write_field(tmp_path / "f.qf", g, f)
            g2, f2 = read_field(tmp_path / "f.qf")
            assert g2 == g
            assert np.array_equal(f2, f)

    def test_header(self, tmp_path):
        g = Grid.uniform((4, 2), (1.0, 0.5), "neumann")
        write_field(tmp_path / "f.qf", g, g.zeros(tensor=False))
        first = (tmp_path / "f.qf").read_text().splitlines()[0]
        assert first == "qfield v1 dim=2 n=4,2 h=0.25,0.25 bc=neumann"

    def test_truncated_file(self, tmp_path):
        g = Grid.uniform(4)
        write_field(tmp_path / "f.qf", g, g.zeros())
        lines = (tmp_path / "f.qf").read_text().splitlines()
        (tmp_path / "g.qf").write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(GridMismatch):
            read_field(tmp_path / "g.qf")
