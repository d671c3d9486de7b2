"""Interface-aligned tensor-product grids on the unit cube."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from honeycomb.geometry import AXES, LatticeParams, Region, plane

logger = logging.getLogger(__name__)

_SAMPLES_PER_SEGMENT = 1025


class MeshBudgetError(ValueError):
    """Raised when a grid would exceed the configured node budget."""


class MeshConfig(BaseModel):
    """Knobs controlling grid construction."""

    model_config = ConfigDict(frozen=True)

    h_ambient: float = Field(
        default=0.05, gt=0, description="Target spacing away from the layers."
    )
    min_cells_per_layer: int = Field(
        default=2, ge=2, description="Minimum number of cells across each layer."
    )
    grading_slope: float = Field(
        default=0.5,
        gt=0,
        le=0.6,
        description="Growth rate of the spacing with distance from a layer.",
    )
    include_control: bool = Field(
        default=False,
        description="Also align to control-zone faces and period band boundaries.",
    )
    max_nodes_per_axis: int = Field(default=400, ge=3)
    max_dofs: int = Field(default=2_000_000, ge=1)


@dataclass(frozen=True, eq=False)
class AxisGrid:
    """Strictly increasing coordinates from -1/2 to 1/2 along one axis."""

    axis: int
    coords: NDArray[np.float64]
    interface_tags: NDArray[np.bool_]

    def __post_init__(self) -> None:
        c = self.coords
        if c[0] != -0.5 or c[-1] != 0.5:
            raise ValueError("axis grid must span [-1/2, 1/2]")
        if np.any(np.diff(c) <= 0):
            raise ValueError("axis grid coordinates must be strictly increasing")

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    @property
    def n_cells(self) -> int:
        return len(self.coords) - 1

    @cached_property
    def widths(self) -> NDArray[np.float64]:
        return np.diff(self.coords)

    @cached_property
    def centers(self) -> NDArray[np.float64]:
        return 0.5 * (self.coords[:-1] + self.coords[1:])

    def index_of(self, x: float) -> int:
        """Index of the node placed exactly at ``x``.

        Raises:
            ValueError: If ``x`` is not a grid coordinate.
        """
        idx = int(np.searchsorted(self.coords, x))
        for j in (idx - 1, idx, idx + 1):
            if 0 <= j < len(self.coords) and self.coords[j] == x:
                return j
        raise ValueError(f"coordinate {x!r} is not a plane of the axis-{self.axis} grid")


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Tensor product of three axis grids. Nodes are stored in C order."""

    axes: tuple[AxisGrid, AxisGrid, AxisGrid]

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(a.n_nodes for a in self.axes)  # type: ignore[return-value]

    @property
    def cell_shape(self) -> tuple[int, int, int]:
        return tuple(a.n_cells for a in self.axes)  # type: ignore[return-value]

    @property
    def n_nodes(self) -> int:
        return math.prod(self.shape)

    @property
    def n_cells(self) -> int:
        return math.prod(self.cell_shape)

    @property
    def dofs(self) -> int:
        """Interior nodes, i.e. unknowns after Dirichlet elimination."""
        return math.prod(max(n - 2, 0) for n in self.shape)

    @cached_property
    def cell_volumes(self) -> NDArray[np.float64]:
        hx, hy, hz = (a.widths for a in self.axes)
        return hx[:, None, None] * hy[None, :, None] * hz[None, None, :]

    def node_coords(self) -> tuple[NDArray[np.float64], ...]:
        """Broadcastable node coordinate arrays ``(x, y, z)``."""
        x, y, z = (a.coords for a in self.axes)
        return x[:, None, None], y[None, :, None], z[None, None, :]

    def cell_centers(self) -> NDArray[np.float64]:
        """Cell centers as an array of shape ``cell_shape + (3,)``."""
        cx, cy, cz = (a.centers for a in self.axes)
        pts = np.empty(self.cell_shape + (3,))
        pts[..., 0] = cx[:, None, None]
        pts[..., 1] = cy[None, :, None]
        pts[..., 2] = cz[None, None, :]
        return pts

    @cached_property
    def boundary_mask(self) -> NDArray[np.bool_]:
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :, :] = mask[-1, :, :] = True
        mask[:, 0, :] = mask[:, -1, :] = True
        mask[:, :, 0] = mask[:, :, -1] = True
        return mask

    def cell_mask(self, region: Region, lat: LatticeParams) -> NDArray[np.bool_]:
        """Cells whose center lies in ``region``; exact when the grid is aligned."""
        return region.contains(self.cell_centers(), lat)

    def same_as(self, other: GridSpec) -> bool:
        return self is other or all(
            np.array_equal(a.coords, b.coords) for a, b in zip(self.axes, other.axes)
        )

    def csv_rows(self) -> Iterator[tuple[int, int, float, bool]]:
        """Rows ``(axis, index, coord, is_interface)`` for the grid dump."""
        for grid in self.axes:
            for index, (coord, tag) in enumerate(zip(grid.coords, grid.interface_tags)):
                yield grid.axis, index, float(coord), bool(tag)


def _even(m: int) -> int:
    return m + (m % 2)


def _graded_segment(
    lo: float, hi: float, spacing: Callable[[NDArray[np.float64]], NDArray[np.float64]]
) -> NDArray[np.float64]:
    """Points in ``[lo, hi]`` equidistributed with respect to ``1/spacing``.

    Cell widths are a fraction in ``(1/2, 1]`` of the local target spacing, so a
    spacing function with slope ``s`` keeps adjacent width ratios near ``1 + s``.
    """
    xs = np.linspace(lo, hi, _SAMPLES_PER_SEGMENT)
    density = 1.0 / spacing(xs)
    cumulative = np.concatenate(
        ([0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(xs)))
    )
    total = cumulative[-1]
    m = max(1, math.ceil(total - 1e-9))
    pts = np.interp(np.linspace(0.0, total, m + 1), cumulative, xs)
    pts[0], pts[-1] = lo, hi
    return pts


def build_axis_grid(
    lat: LatticeParams,
    axis: int,
    h_ambient: float,
    min_cells_per_layer: int = 2,
    include_control: bool = False,
    *,
    grading_slope: float = 0.5,
    max_nodes: int = 400,
) -> AxisGrid:
    """Grid along ``axis`` containing every layer face ``eps k +- r_axis``.

    Each layer holds an even number (at least ``min_cells_per_layer``) of equal
    cells. Between mandatory coordinates the spacing grows linearly with the
    distance to the nearest layer, capped at ``h_ambient``. With
    ``include_control`` the control faces ``eps k +- R_axis`` and the band
    boundaries ``eps (k + 1/2)`` are mandatory too. The half axis ``[0, 1/2]`` is
    built first and mirrored, so the coordinate set is symmetric.

    Raises:
        ValueError: If ``h_ambient > eps/2`` or ``min_cells_per_layer < 2``.
        MeshBudgetError: If the axis would exceed ``max_nodes`` nodes.
    """
    eps = lat.eps
    if h_ambient > eps / 2:
        raise ValueError(f"h_ambient={h_ambient} exceeds eps/2={eps / 2:.6g}")
    if min_cells_per_layer < 2:
        raise ValueError("min_cells_per_layer must be at least 2")

    r = lat.r_float(axis)
    if r <= 0:
        m = _even(math.ceil(1.0 / h_ambient - 1e-9))
        half = np.linspace(0.0, 0.5, m // 2 + 1)
        tags = np.zeros_like(half, dtype=bool)
    else:
        R = lat.R_float(axis)
        layer_cells = _even(max(min_cells_per_layer, math.ceil(2 * r / h_ambient - 1e-9)))
        h_layer = 2 * r / layer_cells

        def spacing(x: NDArray[np.float64]) -> NDArray[np.float64]:
            k = np.clip(np.rint(x / eps), 0, lat.n)
            dist = np.maximum(np.abs(x - k * eps) - r, 0.0)
            return np.minimum(h_ambient, h_layer + grading_slope * dist)

        interfaces: set[float] = set()
        others: set[float] = {0.0, 0.5}
        layer_lo: set[float] = set()
        for k in range(lat.n + 1):
            if k > 0:
                interfaces.add(plane(k, -r, eps))
                layer_lo.add(plane(k, -r, eps))
            interfaces.add(plane(k, r, eps))
            if include_control:
                if k > 0:
                    interfaces.add(plane(k, -R, eps))
                interfaces.add(plane(k, R, eps))
                if k < lat.n:
                    others.add(plane(k, eps / 2, eps))
        mandatory = sorted(interfaces | others)

        pieces: list[NDArray[np.float64]] = []
        for lo, hi in zip(mandatory[:-1], mandatory[1:]):
            if lo == 0.0 and hi == r:
                seg = np.linspace(lo, hi, layer_cells // 2 + 1)
            elif lo in layer_lo:
                seg = np.linspace(lo, hi, layer_cells + 1)
            else:
                seg = _graded_segment(lo, hi, spacing)
            seg[0], seg[-1] = lo, hi
            pieces.append(seg if not pieces else seg[1:])
        half = np.concatenate(pieces)
        tags = np.isin(half, np.array(sorted(interfaces)))

    coords = np.concatenate((-half[:0:-1], half))
    coords[0], coords[-1] = -0.5, 0.5
    full_tags = np.concatenate((tags[:0:-1], tags))
    if len(coords) > max_nodes:
        raise MeshBudgetError(
            f"axis {axis} needs {len(coords)} nodes, budget is {max_nodes}; "
            "raise h_ambient or lower min_cells_per_layer"
        )
    logger.debug("axis %d grid: %d nodes, min width %.3g", axis, len(coords), np.diff(coords).min())
    return AxisGrid(axis=axis, coords=coords, interface_tags=full_tags)


def build_grid(lat: LatticeParams, config: MeshConfig | None = None) -> GridSpec:
    """Aligned grid for ``lat``; every cell lies inside or outside each layer.

    Raises:
        MeshBudgetError: If an axis or the total number of unknowns exceeds the
            budget in ``config``.
    """
    config = config or MeshConfig()
    h_ambient = config.h_ambient
    if h_ambient > lat.eps / 2:
        logger.warning(
            "h_ambient=%.4g exceeds eps/2 at n=%d; using %.4g",
            h_ambient,
            lat.n,
            lat.eps / 2,
        )
        h_ambient = lat.eps / 2
    grid = GridSpec(
        axes=tuple(  # type: ignore[arg-type]
            build_axis_grid(
                lat,
                axis,
                h_ambient,
                config.min_cells_per_layer,
                config.include_control,
                grading_slope=config.grading_slope,
                max_nodes=config.max_nodes_per_axis,
            )
            for axis in AXES
        )
    )
    if grid.dofs > config.max_dofs:
        raise MeshBudgetError(f"grid has {grid.dofs} unknowns, budget is {config.max_dofs}")
    logger.info("grid n=%d shape=%s dofs=%d", lat.n, grid.shape, grid.dofs)
    return grid


def uniform_grid(cells_per_axis: int) -> GridSpec:
    """Uniform grid on the unit cube, used for manufactured-solution checks."""
    m = _even(cells_per_axis)
    half = np.linspace(0.0, 0.5, m // 2 + 1)
    coords = np.concatenate((-half[:0:-1], half))
    coords[0], coords[-1] = -0.5, 0.5
    tags = np.zeros_like(coords, dtype=bool)
    return GridSpec(axes=tuple(AxisGrid(axis, coords.copy(), tags.copy()) for axis in AXES))  # type: ignore[arg-type]
