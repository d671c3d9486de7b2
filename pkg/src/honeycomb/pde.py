"""Fine-scale conduction problem: trilinear Galerkin assembly and Jacobi PCG.

The weak problem is ``int sigma grad u . grad v = <f, v>`` on the unit cube
with ``u = 0`` on the boundary, where ``sigma = a`` outside the layer union and
``b / |T_eps|`` inside. Grids are interface aligned, so ``sigma`` is constant on
every cell and the stiffness integrals are exact.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from numpy.typing import NDArray
from scipy import sparse

from honeycomb.fields import (
    CORNERS,
    MASS_1D,
    STIFFNESS_1D,
    ScalarField,
    at_gauss,
    gauss_coordinates,
    gauss_integral,
    gradient_at_gauss,
    load_vector,
)
from honeycomb.functions import Analytic, AnalyticWithGradient, SourceSpec
from honeycomb.geometry import LatticeParams, Region, measures
from honeycomb.mesh import GridSpec
from honeycomb.types import SolveStats

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# lexicographically positive neighbour offsets; the negative ones are mirrored
_POSITIVE_OFFSETS = tuple(d for d in itertools.product((-1, 0, 1), repeat=3) if d > (0, 0, 0))


class ConvergenceError(RuntimeError):
    """Conjugate gradient stopped before reaching the requested tolerance."""

    def __init__(self, message: str, stats: SolveStats) -> None:
        super().__init__(message)
        self.stats = stats


@dataclass(frozen=True, eq=False)
class ConductivityField:
    """Cell-wise conductivity on an aligned grid."""

    grid: GridSpec
    values: FloatArray
    a: float
    layer_value: float
    union_measure: float

    @property
    def contrast(self) -> float:
        """Ratio of layer to ambient conductivity."""
        return self.layer_value / self.a

    def mass(self) -> float:
        """``int sigma`` over the cube."""
        return float(np.sum(self.values * self.grid.cell_volumes))


def conductivity_field(lat: LatticeParams, a: float, b: float, grid: GridSpec) -> ConductivityField:
    """``a`` outside the layers, ``b / |T_eps|`` inside, by cell-center membership.

    Raises:
        ValueError: If ``a`` or ``b`` is not positive.
    """
    if a <= 0 or b <= 0:
        raise ValueError(f"conductivities must be positive, got a={a!r}, b={b!r}")
    union = float(measures(lat).union)
    layer_value = b / union
    inside = grid.cell_mask(Region.union(), lat)
    values = np.where(inside, layer_value, float(a))
    logger.info(
        "conductivity n=%d a=%g layer=%g contrast=%.4g layer_cells=%d",
        lat.n,
        a,
        layer_value,
        layer_value / a,
        int(inside.sum()),
    )
    return ConductivityField(grid, values, float(a), layer_value, union)


def uniform_conductivity(grid: GridSpec, value: float = 1.0) -> ConductivityField:
    if value <= 0:
        raise ValueError(f"conductivity must be positive, got {value!r}")
    return ConductivityField(grid, np.full(grid.cell_shape, float(value)), value, value, 0.0)


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Symmetric system ``matrix x = rhs`` over the unknown nodes ``free``.

    ``boundary_values`` holds the nodal Dirichlet data (zero for the
    homogeneous problem); it is added back when the solution is expanded.
    """

    matrix: sparse.csr_matrix
    rhs: FloatArray
    free: NDArray[np.intp]
    grid: Optional[GridSpec] = None
    boundary_values: Optional[FloatArray] = None

    @property
    def dofs(self) -> int:
        return int(self.rhs.size)

    def expand(self, x: FloatArray) -> ScalarField:
        if self.grid is None:
            raise ValueError("system has no grid to expand onto")
        if self.boundary_values is None:
            values = np.zeros(self.grid.shape)
        else:
            values = self.boundary_values.copy()
        values.reshape(-1)[self.free] = x
        homogeneous = self.boundary_values is None or not np.any(self.boundary_values)
        return ScalarField(self.grid, values, dirichlet=homogeneous and self.free.size < values.size)


def _stencil(padded: list[FloatArray], shape: tuple[int, int, int], d: tuple[int, int, int]) -> FloatArray:
    """Matrix entry between node ``p`` and ``p + d`` for every node ``p``.

    ``padded[axis]`` are the per-cell weights of the axis-``axis`` gradient term,
    zero padded by one cell on each side.
    """
    out = np.zeros(shape)
    for a in CORNERS:
        b = tuple(ai + di for ai, di in zip(a, d))
        if any(bi not in (0, 1) for bi in b):
            continue
        for axis in range(3):
            coef = 1.0
            for e in range(3):
                ref = STIFFNESS_1D if e == axis else MASS_1D
                coef *= ref[a[e], b[e]]
            window = tuple(slice(1 - a[e], 1 - a[e] + shape[e]) for e in range(3))
            out += coef * padded[axis][window]
    return out


def _axis_weights(
    grid: GridSpec, sigma: ConductivityField, axis_scale: Sequence[float]
) -> list[FloatArray]:
    weights = []
    for axis, scale in enumerate(axis_scale):
        h = grid.axes[axis].widths
        shape = [1, 1, 1]
        shape[axis] = -1
        w = sigma.values * float(scale) * grid.cell_volumes / h.reshape(shape) ** 2
        weights.append(np.pad(w, 1))
    return weights


def assemble(
    grid: GridSpec,
    sigma: ConductivityField,
    f: Optional[Union[SourceSpec, Analytic]] = None,
    *,
    axis_scale: Sequence[float] = (1.0, 1.0, 1.0),
    boundary: Optional[Analytic] = None,
    dirichlet: bool = True,
) -> SparseSystem:
    """Galerkin system of ``int sigma sum_i s_i d_i u d_i v = int f v``.

    Entries are exact for the trilinear basis on boxes. Every node pair is
    computed once and mirrored, so the matrix is symmetric bit for bit.
    Dirichlet nodes are eliminated; ``boundary`` gives non-zero boundary data,
    whose coupling is moved to the right-hand side. With ``dirichlet=False``
    the full Neumann matrix over all nodes is returned.
    """
    if not sigma.grid.same_as(grid):
        raise ValueError("conductivity lives on a different grid")
    if len(axis_scale) != 3 or any(s < 0 for s in axis_scale):
        raise ValueError(f"axis_scale must be three non-negative numbers, got {axis_scale!r}")
    shape = grid.shape
    n_nodes = grid.n_nodes
    padded = _axis_weights(grid, sigma, axis_scale)
    index = np.arange(n_nodes, dtype=np.int64).reshape(shape)

    if dirichlet:
        free = np.flatnonzero(~grid.boundary_mask.reshape(-1))
    else:
        free = np.arange(n_nodes)
    node_map = np.full(n_nodes, -1, dtype=np.int64)
    node_map[free] = np.arange(free.size)

    g_nodes = np.zeros(n_nodes)
    if dirichlet and boundary is not None:
        g = np.broadcast_to(boundary(*grid.node_coords()), shape).reshape(-1)
        mask = grid.boundary_mask.reshape(-1)
        g_nodes[mask] = g[mask]

    rows: list[NDArray[np.int64]] = []
    cols: list[NDArray[np.int64]] = []
    vals: list[FloatArray] = []
    lift = np.zeros(free.size)

    def collect(r: NDArray[np.int64], c: NDArray[np.int64], v: FloatArray) -> None:
        rr, cc = node_map[r], node_map[c]
        keep = (rr >= 0) & (cc >= 0)
        rows.append(rr[keep])
        cols.append(cc[keep])
        vals.append(v[keep])
        if boundary is not None and dirichlet:
            couple = (rr >= 0) & (cc < 0)
            if np.any(couple):
                lift[:] += np.bincount(
                    rr[couple], weights=v[couple] * g_nodes[c[couple]], minlength=free.size
                )

    diag = _stencil(padded, shape, (0, 0, 0))
    collect(index.reshape(-1), index.reshape(-1), diag.reshape(-1))
    for d in _POSITIVE_OFFSETS:
        entries = _stencil(padded, shape, d)
        src = tuple(slice(max(0, -dk), n - max(0, dk)) for dk, n in zip(d, shape))
        dst = tuple(slice(max(0, dk), n - max(0, -dk)) for dk, n in zip(d, shape))
        r, c, v = index[src].reshape(-1), index[dst].reshape(-1), entries[src].reshape(-1)
        collect(r, c, v)
        collect(c, r, v)

    matrix = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(free.size, free.size),
    )
    matrix.sort_indices()

    if f is None:
        rhs = np.zeros(free.size)
    else:
        rhs = load_vector(grid, f).reshape(-1)[free]
    rhs = rhs - lift
    logger.info("assembled system dofs=%d nnz=%d", free.size, matrix.nnz)
    return SparseSystem(
        matrix=matrix,
        rhs=rhs,
        free=free,
        grid=grid,
        boundary_values=g_nodes.reshape(shape) if boundary is not None else None,
    )


def conjugate_gradient(
    matrix: sparse.spmatrix,
    rhs: FloatArray,
    *,
    rel_tol: float = 1e-10,
    max_iter: Optional[int] = None,
) -> tuple[FloatArray, SolveStats]:
    """Jacobi-preconditioned conjugate gradient from a zero initial guess.

    Convergence is declared on the true residual ``||b - Ax|| / ||b||``; when
    the recursive residual has converged but the true one has not, the
    iteration restarts from the true residual.

    Raises:
        ConvergenceError: If ``max_iter`` iterations do not reach ``rel_tol``,
            or a non-positive curvature shows the matrix is not SPD.
        ValueError: If the diagonal has non-positive entries.
    """
    A = sparse.csr_matrix(matrix)
    b = np.asarray(rhs, dtype=float)
    n = b.size
    max_iter = 10 * n if max_iter is None else max_iter
    x = np.zeros(n)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return x, SolveStats(dofs=n, iterations=0, final_residual=0.0, converged=True)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise ValueError("Jacobi preconditioning needs a positive diagonal")
    inv_diag = 1.0 / diag

    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    residual = 1.0
    for iteration in range(1, max_iter + 1):
        Ap = A @ p
        curvature = float(p @ Ap)
        if curvature <= 0:
            stats = SolveStats(dofs=n, iterations=iteration, final_residual=residual, converged=False)
            raise ConvergenceError("non-positive curvature: matrix is not positive definite", stats)
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * Ap
        residual = float(np.linalg.norm(r)) / b_norm
        if residual <= rel_tol:
            r = b - A @ x
            residual = float(np.linalg.norm(r)) / b_norm
            if residual <= rel_tol:
                logger.debug("cg converged iterations=%d residual=%.3e", iteration, residual)
                return x, SolveStats(
                    dofs=n, iterations=iteration, final_residual=residual, converged=True
                )
            z = inv_diag * r
            p = z.copy()
            rz = float(r @ z)
            continue
        z = inv_diag * r
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next
        if iteration % 200 == 0:
            logger.debug("cg iteration=%d residual=%.3e", iteration, residual)
    stats = SolveStats(dofs=n, iterations=max_iter, final_residual=residual, converged=False)
    raise ConvergenceError(
        f"conjugate gradient did not reach {rel_tol:.1e} in {max_iter} iterations "
        f"(residual {residual:.3e}); the system may be ill-conditioned",
        stats,
    )


def solve_cg(
    system: SparseSystem, rel_tol: float = 1e-10, max_iter: Optional[int] = None
) -> tuple[ScalarField, SolveStats]:
    """Solve an assembled system and expand the result to a nodal field."""
    x, stats = conjugate_gradient(system.matrix, system.rhs, rel_tol=rel_tol, max_iter=max_iter)
    logger.info(
        "solved dofs=%d iterations=%d residual=%.3e",
        stats.dofs,
        stats.iterations,
        stats.final_residual,
    )
    return system.expand(x), stats


def l2_norm(u: ScalarField, grid: Optional[GridSpec] = None) -> float:
    if grid is not None and not grid.same_as(u.grid):
        raise ValueError("field does not live on the given grid")
    return math.sqrt(max(u.inner(u), 0.0))


def h1_seminorm(u: ScalarField, grid: Optional[GridSpec] = None) -> float:
    if grid is not None and not grid.same_as(u.grid):
        raise ValueError("field does not live on the given grid")
    return math.sqrt(max(u.energy(), 0.0))


def analytic_l2_norm(grid: GridSpec, fn: Analytic) -> float:
    """``|fn|`` in L2 by 2x2x2 Gauss quadrature on ``grid``."""
    values = np.broadcast_to(fn(*gauss_coordinates(grid)), grid.cell_shape + (2, 2, 2))
    return math.sqrt(gauss_integral(grid, values**2))


def analytic_h1_seminorm(grid: GridSpec, fn: AnalyticWithGradient) -> float:
    grads = fn.gradient(*gauss_coordinates(grid))
    total = sum(np.broadcast_to(g, grid.cell_shape + (2, 2, 2)) ** 2 for g in grads)
    return math.sqrt(gauss_integral(grid, total))


def l2_error(u: ScalarField, reference: Union[ScalarField, Analytic]) -> float:
    """L2 distance to a field on the same grid (exact) or to a closed form (Gauss)."""
    if isinstance(reference, ScalarField):
        return l2_norm(u - reference)
    ref = np.broadcast_to(reference(*gauss_coordinates(u.grid)), u.grid.cell_shape + (2, 2, 2))
    return math.sqrt(gauss_integral(u.grid, (at_gauss(u.corners) - ref) ** 2))


def h1_error(u: ScalarField, reference: Union[ScalarField, AnalyticWithGradient]) -> float:
    """H1-seminorm distance; closed forms must provide ``gradient``."""
    if isinstance(reference, ScalarField):
        return h1_seminorm(u - reference)
    coords = gauss_coordinates(u.grid)
    total = 0.0
    for uh, ref in zip(gradient_at_gauss(u.grid, u.corners), reference.gradient(*coords)):
        diff = uh - np.broadcast_to(ref, uh.shape)
        total += gauss_integral(u.grid, diff**2)
    return math.sqrt(total)


def directional_energies(
    u: ScalarField,
    sigma: Optional[ConductivityField] = None,
    axis_scale: Sequence[float] = (1.0, 1.0, 1.0),
) -> tuple[float, float, float]:
    """``E_i = int sigma s_i (d_i u)^2`` for each axis."""
    weights = None if sigma is None else sigma.values
    energies = []
    for axis in range(3):
        w = weights * axis_scale[axis] if weights is not None else np.full(u.grid.cell_shape, float(axis_scale[axis]))
        energies.append(u.gradient_inner(u, axis, weights=w))
    return energies[0], energies[1], energies[2]
