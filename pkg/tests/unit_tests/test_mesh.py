import logging

import numpy as np
import pytest

from honeycomb.geometry import LatticeParams, Region, band_faces, layer_faces, measures
from honeycomb.mesh import MeshBudgetError, MeshConfig, build_axis_grid, build_grid, uniform_grid


def test_layer_faces_are_grid_planes(lattice: LatticeParams) -> None:
    grid = build_grid(lattice)
    for axis in range(3):
        for lo, hi in layer_faces(lattice, axis):
            j_lo = grid.axes[axis].index_of(lo)
            j_hi = grid.axes[axis].index_of(hi)
            assert j_hi - j_lo >= 2
            assert (j_hi - j_lo) % 2 == 0
            assert grid.axes[axis].interface_tags[j_lo]
            assert grid.axes[axis].interface_tags[j_hi]


def test_control_faces_and_bands_are_grid_planes(lattice: LatticeParams, aligned_config: MeshConfig) -> None:
    grid = build_grid(lattice, aligned_config)
    for axis in range(3):
        coords = grid.axes[axis]
        for lo, hi in layer_faces(lattice, axis, lattice.R_float(axis)):
            coords.index_of(lo)
            coords.index_of(hi)
        for x in band_faces(lattice):
            coords.index_of(x)


def test_grid_is_symmetric(lattice: LatticeParams, aligned_config: MeshConfig) -> None:
    grid = build_grid(lattice, aligned_config)
    for axis_grid in grid.axes:
        c = axis_grid.coords
        assert c[0] == -0.5 and c[-1] == 0.5
        assert np.array_equal(c, -c[::-1])
        assert np.all(np.diff(c) > 0)


def test_cells_do_not_straddle_layers(lattice: LatticeParams) -> None:
    grid = build_grid(lattice)
    for axis, axis_grid in enumerate(grid.axes):
        c = axis_grid.coords
        r = lattice.r_float(axis)
        for lo, hi in zip(c[:-1], c[1:]):
            k = round(0.5 * (lo + hi) / lattice.eps)
            inside = abs(0.5 * (lo + hi) - k * lattice.eps) < r
            if inside:
                assert abs(lo - k * lattice.eps) <= r + 1e-15
                assert abs(hi - k * lattice.eps) <= r + 1e-15


def test_grading_ratio(lattice: LatticeParams) -> None:
    grid = build_grid(lattice, MeshConfig(h_ambient=0.05))
    for axis_grid in grid.axes:
        w = axis_grid.widths
        ratio = np.maximum(w[1:] / w[:-1], w[:-1] / w[1:])
        assert ratio.max() <= 2.0


def test_union_volume_is_exact_on_aligned_grid(lattice: LatticeParams) -> None:
    grid = build_grid(lattice)
    inside = grid.cell_mask(Region.union(), lattice)
    volume = grid.cell_volumes[inside].sum()
    assert volume == pytest.approx(float(measures(lattice).union), rel=1e-12)


def test_gridwork_third_axis_is_uniform(gridwork_lattice: LatticeParams) -> None:
    grid = build_grid(gridwork_lattice, MeshConfig(h_ambient=0.05))
    w = grid.axes[2].widths
    assert np.allclose(w, w[0])
    assert not grid.axes[2].interface_tags.any()


def test_node_budget(lattice: LatticeParams) -> None:
    with pytest.raises(MeshBudgetError, match="budget"):
        build_grid(lattice, MeshConfig(max_nodes_per_axis=10))
    with pytest.raises(MeshBudgetError, match="unknowns"):
        build_grid(lattice, MeshConfig(max_dofs=100))


def test_axis_spacing_validation(lattice: LatticeParams) -> None:
    with pytest.raises(ValueError, match="exceeds eps/2"):
        build_axis_grid(lattice, 0, h_ambient=0.2)
    with pytest.raises(ValueError, match="min_cells_per_layer"):
        build_axis_grid(lattice, 0, h_ambient=0.05, min_cells_per_layer=1)


def test_coarse_spacing_is_clamped_with_warning(lattice: LatticeParams, caplog: pytest.LogCaptureFixture) -> None:
    with caplog.at_level(logging.WARNING, logger="honeycomb.mesh"):
        grid = build_grid(lattice, MeshConfig(h_ambient=0.3))
    assert "exceeds eps/2" in caplog.text
    assert grid.axes[0].widths.max() <= lattice.eps / 2 + 1e-12
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="honeycomb.mesh"):
        build_grid(lattice, MeshConfig(h_ambient=0.1))
    assert "exceeds eps/2" not in caplog.text


def test_index_of_requires_exact_plane(lattice: LatticeParams) -> None:
    grid = build_grid(lattice)
    with pytest.raises(ValueError, match="not a plane"):
        grid.axes[0].index_of(0.0123456)


def test_uniform_grid() -> None:
    grid = uniform_grid(4)
    assert grid.shape == (5, 5, 5)
    assert grid.dofs == 27
    assert np.allclose(grid.axes[0].coords, np.linspace(-0.5, 0.5, 5))
    assert grid.cell_volumes.sum() == pytest.approx(1.0)
    rows = list(grid.csv_rows())
    assert len(rows) == 15
    assert rows[0] == (0, 0, -0.5, False)
