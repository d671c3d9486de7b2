import math

import numpy as np
import pytest

from honeycomb.fields import (
    BandedField,
    ScalarField,
    cell_corners,
    load_vector,
    nodal_from_corners,
    scatter_corners,
)
from honeycomb.functions import SourceSpec
from honeycomb.geometry import LatticeParams, Region
from honeycomb.mesh import GridSpec, build_grid, uniform_grid


def _x(axis: int):
    return lambda x, y, z: np.broadcast_arrays(x, y, z)[axis]


def test_constant_field_integrates_to_one() -> None:
    grid = uniform_grid(4)
    one = ScalarField(grid, np.ones(grid.shape))
    assert one.inner(one) == pytest.approx(1.0, rel=1e-14)
    assert one.energy() == pytest.approx(0.0, abs=1e-14)


def test_coordinate_moments_are_exact(lattice: LatticeParams) -> None:
    grid = build_grid(lattice)
    x0 = ScalarField.from_function(grid, _x(0))
    x1 = ScalarField.from_function(grid, _x(1))
    assert x0.inner(x0) == pytest.approx(1 / 12, rel=1e-12)
    assert x0.energy() == pytest.approx(1.0, rel=1e-12)
    assert x0.gradient_inner(x0, 1) == pytest.approx(0.0, abs=1e-14)
    product = ScalarField(grid, x0.values * x1.values)
    assert product.inner(product) == pytest.approx(1 / 144, rel=1e-12)


def test_masked_integral_over_layers(lattice: LatticeParams) -> None:
    grid = build_grid(lattice)
    one = ScalarField(grid, np.ones(grid.shape))
    mask = grid.cell_mask(Region.layer(0), lattice)
    assert one.inner(one, mask) == pytest.approx(0.06, rel=1e-12)


def test_corners_round_trip() -> None:
    grid = uniform_grid(4)
    values = np.random.default_rng(1).standard_normal(grid.shape)
    assert np.array_equal(nodal_from_corners(cell_corners(values)), values)


def test_scatter_corners_counts_cells_per_node() -> None:
    grid = uniform_grid(2)
    counts = scatter_corners(np.ones(grid.cell_shape + (2, 2, 2)), grid.shape)
    assert counts[1, 1, 1] == 8
    assert counts[0, 0, 0] == 1
    assert counts.sum() == 8 * grid.n_cells


def test_field_validation() -> None:
    grid = uniform_grid(2)
    with pytest.raises(ValueError, match="shape"):
        ScalarField(grid, np.ones((2, 2, 2)))
    with pytest.raises(ValueError, match="boundary"):
        ScalarField(grid, np.ones(grid.shape), dirichlet=True)
    other = uniform_grid(4)
    with pytest.raises(ValueError, match="different grids"):
        ScalarField.zeros(grid) + ScalarField.zeros(other)


def test_arithmetic_keeps_flags() -> None:
    grid = uniform_grid(4)
    u = ScalarField.from_function(grid, lambda x, y, z: np.cos(math.pi * x) * np.cos(math.pi * y) * np.cos(math.pi * z), dirichlet=True)
    assert u.dirichlet
    v = 2.0 * u - u
    assert v.dirichlet
    assert np.allclose(v.values, u.values)
    assert (-u).inner(u) == pytest.approx(-u.inner(u))


def test_load_vector_sums_to_integral() -> None:
    grid = uniform_grid(8)
    assert load_vector(grid, SourceSpec.constant(2.5)).sum() == pytest.approx(2.5, rel=1e-12)
    total = load_vector(grid, SourceSpec.cosine(1.0)).sum()
    assert total == pytest.approx((2 / math.pi) ** 3, rel=1e-3)


def test_banded_field_is_constant_along_axis(aligned_grid: GridSpec) -> None:
    grid = aligned_grid
    n_cells = grid.axes[0].n_cells
    cell_band = (np.arange(n_cells) >= n_cells // 2).astype(np.intp)
    traces = np.random.default_rng(0).standard_normal((2, grid.shape[1], grid.shape[2]))
    field = BandedField.from_traces(grid, 0, cell_band, traces)
    assert not field.is_continuous
    assert field.band_variation() == 0.0
    assert np.array_equal(field.corners[0, :, :, 0, 0, 0], traces[0, :-1, :-1])
    assert np.array_equal(field.corners[-1, :, :, 1, 1, 1], traces[1, 1:, 1:])


def test_banded_field_needs_one_band_per_cell() -> None:
    grid = uniform_grid(4)
    with pytest.raises(ValueError, match="one band index"):
        BandedField.from_traces(grid, 1, np.zeros(3, dtype=np.intp), np.zeros((1, 5, 5)))


def test_csv_rows_are_c_ordered() -> None:
    grid = uniform_grid(2)
    u = ScalarField.from_function(grid, _x(2))
    rows = list(u.csv_rows())
    assert len(rows) == 27
    assert rows[0] == (0, 0, 0, -0.5, -0.5, -0.5, -0.5)
    assert rows[1][:3] == (0, 0, 1)
