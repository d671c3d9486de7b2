"""Scalar fields on tensor grids and exact cell-wise quadrature.

Every field is handled cell by cell through its corner values, an array of
shape ``cell_shape + (2, 2, 2)``. Continuous fields derive the corners from
nodal values; discontinuous fields (slice averages, step approximations) carry
their corners explicitly. Integrals of products of two fields that are
trilinear on each cell are exact: with the 1D reference matrices

    M = [[2, 1], [1, 2]] / 6        S = [[1, -1], [-1, 1]]

``int_cell u v = vol * u^T (M x M x M) v`` and
``int_cell d_x u d_x v = vol / h_x^2 * u^T (S x M x M) v``.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterator
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from honeycomb.functions import Analytic
from honeycomb.mesh import GridSpec

FloatArray = NDArray[np.float64]

MASS_1D = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
STIFFNESS_1D = np.array([[1.0, -1.0], [-1.0, 1.0]])

_xi, _ = np.polynomial.legendre.leggauss(2)
GAUSS_T = (_xi + 1.0) / 2.0
GAUSS_WEIGHT = 1.0 / 8.0
# basis values and derivatives at the two Gauss points: [point, local node]
_BASIS = np.stack((1.0 - GAUSS_T, GAUSS_T), axis=1)
_DBASIS = np.array([[-1.0, 1.0], [-1.0, 1.0]])

CORNERS = tuple(itertools.product((0, 1), repeat=3))


def _contract(c: FloatArray, a: FloatArray, b: FloatArray, d: FloatArray) -> FloatArray:
    return np.einsum("...abc,ia,jb,kc->...ijk", c, a, b, d, optimize=True)


def cell_corners(values: FloatArray) -> FloatArray:
    """Corner values of every cell of a nodal array."""
    nx, ny, nz = (s - 1 for s in values.shape)
    out = np.empty((nx, ny, nz, 2, 2, 2))
    for a, b, c in CORNERS:
        out[..., a, b, c] = values[a : a + nx, b : b + ny, c : c + nz]
    return out


def nodal_from_corners(corners: FloatArray) -> FloatArray:
    """Nodal representative of a cell-wise field: each node takes the value
    of the cell above it, the last plane of each axis the cell below."""
    nx, ny, nz = corners.shape[:3]
    v = np.empty((nx + 1, ny + 1, nz + 1))
    v[:nx, :ny, :nz] = corners[..., 0, 0, 0]
    v[nx, :ny, :nz] = corners[-1, :, :, 1, 0, 0]
    v[:nx, ny, :nz] = corners[:, -1, :, 0, 1, 0]
    v[:nx, :ny, nz] = corners[:, :, -1, 0, 0, 1]
    v[nx, ny, :nz] = corners[-1, -1, :, 1, 1, 0]
    v[nx, :ny, nz] = corners[-1, :, -1, 1, 0, 1]
    v[:nx, ny, nz] = corners[:, -1, -1, 0, 1, 1]
    v[nx, ny, nz] = corners[-1, -1, -1, 1, 1, 1]
    return v


def scatter_corners(local: FloatArray, shape: tuple[int, int, int]) -> FloatArray:
    """Accumulate per-cell corner contributions into a nodal array.

    The eight shifted additions run in a fixed order, so the result is
    reproducible bit for bit.
    """
    nx, ny, nz = local.shape[:3]
    out = np.zeros(shape)
    for a, b, c in CORNERS:
        out[a : a + nx, b : b + ny, c : c + nz] += local[..., a, b, c]
    return out


def _masked_sum(per_cell: FloatArray, mask: Optional[NDArray[np.bool_]]) -> float:
    if mask is None:
        return float(per_cell.sum())
    return float(per_cell[mask].sum())


def mass_form(
    grid: GridSpec,
    cu: FloatArray,
    cv: FloatArray,
    mask: Optional[NDArray[np.bool_]] = None,
) -> float:
    """``int u v`` over the cells selected by ``mask`` (all cells by default)."""
    mv = _contract(cv, MASS_1D, MASS_1D, MASS_1D)
    per_cell = grid.cell_volumes * np.sum(cu * mv, axis=(-3, -2, -1))
    return _masked_sum(per_cell, mask)


def gradient_form(
    grid: GridSpec,
    cu: FloatArray,
    cv: FloatArray,
    axis: int,
    weights: Optional[FloatArray] = None,
    mask: Optional[NDArray[np.bool_]] = None,
) -> float:
    """``int w d_axis u d_axis v`` with a cell-wise constant weight ``w``."""
    mats = [MASS_1D, MASS_1D, MASS_1D]
    mats[axis] = STIFFNESS_1D
    sv = _contract(cv, *mats)
    h = grid.axes[axis].widths
    shape = [1, 1, 1]
    shape[axis] = -1
    scale = grid.cell_volumes / (h.reshape(shape) ** 2)
    if weights is not None:
        scale = scale * weights
    per_cell = scale * np.sum(cu * sv, axis=(-3, -2, -1))
    return _masked_sum(per_cell, mask)


def gauss_coordinates(grid: GridSpec) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Coordinates of the 2x2x2 Gauss points of every cell.

    The arrays broadcast to ``cell_shape + (2, 2, 2)``.
    """
    pts = []
    for axis, ag in enumerate(grid.axes):
        g = ag.coords[:-1, None] + ag.widths[:, None] * GAUSS_T[None, :]
        shape = [1] * 6
        shape[axis] = ag.n_cells
        shape[3 + axis] = 2
        pts.append(g.reshape(shape))
    return pts[0], pts[1], pts[2]


def at_gauss(corners: FloatArray) -> FloatArray:
    return _contract(corners, _BASIS, _BASIS, _BASIS)


def gradient_at_gauss(
    grid: GridSpec, corners: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    grads = []
    for axis in range(3):
        mats = [_BASIS, _BASIS, _BASIS]
        mats[axis] = _DBASIS
        h = grid.axes[axis].widths
        shape = [1, 1, 1, 1, 1, 1]
        shape[axis] = -1
        grads.append(_contract(corners, *mats) / h.reshape(shape))
    return grads[0], grads[1], grads[2]


def gauss_integral(
    grid: GridSpec, values_at_gauss: FloatArray, mask: Optional[NDArray[np.bool_]] = None
) -> float:
    per_cell = grid.cell_volumes * GAUSS_WEIGHT * values_at_gauss.sum(axis=(-3, -2, -1))
    return _masked_sum(per_cell, mask)


def load_vector(grid: GridSpec, f: Analytic) -> FloatArray:
    """Nodal load ``int f phi_p`` by 2x2x2 Gauss quadrature on each cell."""
    fg = f(*gauss_coordinates(grid))
    fg = np.broadcast_to(fg, grid.cell_shape + (2, 2, 2))
    weighted = fg * (grid.cell_volumes * GAUSS_WEIGHT)[..., None, None, None]
    local = np.einsum("...pqr,pa,qb,rc->...abc", weighted, _BASIS, _BASIS, _BASIS, optimize=True)
    return scatter_corners(local, grid.shape)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values on a grid.

    Attributes:
        grid: The grid the field lives on.
        values: Nodal values, shape ``grid.shape``. For discontinuous fields
            this is only a representative used for dumps.
        dirichlet: Whether boundary nodes are constrained to zero.
        piecewise: Explicit per-cell corner values for discontinuous fields.
    """

    grid: GridSpec
    values: FloatArray
    dirichlet: bool = False
    piecewise: Optional[FloatArray] = None

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field has shape {self.values.shape}, grid has {self.grid.shape}"
            )
        if self.piecewise is not None and self.piecewise.shape != self.grid.cell_shape + (2, 2, 2):
            raise ValueError("piecewise corner array does not match the grid cells")
        if self.dirichlet and np.any(self.values[self.grid.boundary_mask] != 0):
            raise ValueError("dirichlet field has non-zero boundary values")

    @classmethod
    def from_function(
        cls, grid: GridSpec, fn: Analytic, *, dirichlet: bool = False
    ) -> ScalarField:
        """Nodal interpolant of ``fn``."""
        values = np.array(np.broadcast_to(fn(*grid.node_coords()), grid.shape), dtype=float)
        if dirichlet:
            values[grid.boundary_mask] = 0.0
        return cls(grid, values, dirichlet)

    @classmethod
    def zeros(cls, grid: GridSpec) -> ScalarField:
        return cls(grid, np.zeros(grid.shape), dirichlet=True)

    @classmethod
    def from_corners(cls, grid: GridSpec, corners: FloatArray) -> ScalarField:
        return cls(grid, nodal_from_corners(corners), piecewise=corners)

    @property
    def is_continuous(self) -> bool:
        return self.piecewise is None

    @cached_property
    def corners(self) -> FloatArray:
        if self.piecewise is not None:
            return self.piecewise
        return cell_corners(self.values)

    def _check_grid(self, other: ScalarField) -> None:
        if not self.grid.same_as(other.grid):
            raise ValueError("fields live on different grids")

    def _combine(self, other: ScalarField, sign: float) -> ScalarField:
        self._check_grid(other)
        values = self.values + sign * other.values
        dirichlet = self.dirichlet and other.dirichlet
        if self.is_continuous and other.is_continuous:
            return ScalarField(self.grid, values, dirichlet)
        return ScalarField(
            self.grid, values, dirichlet, piecewise=self.corners + sign * other.corners
        )

    def __add__(self, other: ScalarField) -> ScalarField:
        return self._combine(other, 1.0)

    def __sub__(self, other: ScalarField) -> ScalarField:
        return self._combine(other, -1.0)

    def __mul__(self, factor: float) -> ScalarField:
        piecewise = None if self.piecewise is None else self.piecewise * factor
        return ScalarField(self.grid, self.values * factor, self.dirichlet, piecewise)

    __rmul__ = __mul__

    def __neg__(self) -> ScalarField:
        return self * -1.0

    def inner(self, other: ScalarField, mask: Optional[NDArray[np.bool_]] = None) -> float:
        """Exact ``int u v`` over the masked cells."""
        self._check_grid(other)
        return mass_form(self.grid, self.corners, other.corners, mask)

    def gradient_inner(
        self,
        other: ScalarField,
        axis: int,
        weights: Optional[FloatArray] = None,
        mask: Optional[NDArray[np.bool_]] = None,
    ) -> float:
        """Exact ``int w d_axis u d_axis v`` over the masked cells."""
        self._check_grid(other)
        return gradient_form(self.grid, self.corners, other.corners, axis, weights, mask)

    def energy(
        self,
        other: Optional[ScalarField] = None,
        weights: Optional[FloatArray] = None,
        mask: Optional[NDArray[np.bool_]] = None,
    ) -> float:
        """``int w grad u . grad v`` summed over the three axes."""
        other = self if other is None else other
        return math.fsum(self.gradient_inner(other, axis, weights, mask) for axis in range(3))

    def csv_rows(self) -> Iterator[tuple[int, int, int, float, float, float, float]]:
        """Rows ``(ix, iy, iz, x, y, z, value)`` in C order."""
        x, y, z = (a.coords for a in self.grid.axes)
        for (ix, iy, iz), value in np.ndenumerate(self.values):
            yield ix, iy, iz, float(x[ix]), float(y[iy]), float(z[iz]), float(value)


@dataclass(frozen=True, eq=False)
class BandedField(ScalarField):
    """A field constant along ``band_axis`` on each band of cell layers.

    Cell layer ``c`` along ``band_axis`` takes the transverse nodal trace
    ``traces[cell_band[c]]``; ``traces`` has shape
    ``(n_bands, N_a, N_b)`` with ``a < b`` the two other axes.
    """

    band_axis: int = 0
    cell_band: Optional[NDArray[np.intp]] = None
    traces: Optional[FloatArray] = None

    @classmethod
    def from_traces(
        cls,
        grid: GridSpec,
        axis: int,
        cell_band: NDArray[np.intp],
        traces: FloatArray,
        *,
        dirichlet: bool = False,
    ) -> BandedField:
        if len(cell_band) != grid.axes[axis].n_cells:
            raise ValueError("one band index per cell layer is required")
        planes = np.moveaxis(traces[cell_band], 0, axis)
        cells = grid.cell_shape
        corners = np.empty(cells + (2, 2, 2))
        for offset in CORNERS:
            index = tuple(
                slice(None) if d == axis else slice(offset[d], offset[d] + cells[d])
                for d in range(3)
            )
            corners[(Ellipsis,) + offset] = planes[index]
        values = nodal_from_corners(corners)
        if dirichlet:
            values[grid.boundary_mask] = 0.0
        return cls(
            grid,
            values,
            dirichlet,
            piecewise=corners,
            band_axis=axis,
            cell_band=cell_band,
            traces=traces,
        )

    def band_variation(self) -> float:
        """Largest change of the field along ``band_axis`` inside one band."""
        assert self.piecewise is not None and self.cell_band is not None
        c = np.moveaxis(self.piecewise, (self.band_axis, 3 + self.band_axis), (0, 3))
        within_cell = np.abs(c[..., 0, :, :] - c[..., 1, :, :]).max(initial=0.0)
        across = 0.0
        same = self.cell_band[1:] == self.cell_band[:-1]
        if np.any(same):
            across = float(np.abs(c[1:][same] - c[:-1][same]).max(initial=0.0))
        return max(float(within_cell), across)
