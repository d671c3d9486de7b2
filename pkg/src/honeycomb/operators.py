"""Slice averages, capacitary and step fields, and measured inequalities.

All fields live on a grid aligned with the lattice. Traces are read from grid
planes, never interpolated, and every integral is evaluated cell by cell with
the exact forms of :mod:`honeycomb.fields`. For the discontinuous fields to be
integrated exactly the grid must also contain the control faces and the band
boundaries (``MeshConfig(include_control=True)``).
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from honeycomb.fields import BandedField, ScalarField, at_gauss, gauss_coordinates, gauss_integral
from honeycomb.functions import SmoothTestFunction, SourceSpec
from honeycomb.geometry import (
    AXES,
    LatticeParams,
    Region,
    band_faces,
    control_measures,
    layer_faces,
    measures,
    plane,
)
from honeycomb.mesh import GridSpec
from honeycomb.types import EnergyTerm, InequalityReport

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DISCRETE_TOLERANCE = 1.1


def _plane_index(grid: GridSpec, axis: int, x: float) -> int:
    try:
        return grid.axes[axis].index_of(x)
    except ValueError as exc:
        raise ValueError(
            f"grid is not aligned with the lattice: no plane at x{axis} = {x:.12g}"
        ) from exc


def _warn_unless_aligned(grid: GridSpec, axis: int, coords: list[float], what: str) -> None:
    missing = [x for x in coords if not np.any(grid.axes[axis].coords == x)]
    if missing:
        logger.warning(
            "grid misses %d %s planes on axis %d; integrals over them are approximate",
            len(missing),
            what,
            axis,
        )


def _nearest_k(x: FloatArray, lat: LatticeParams) -> NDArray[np.intp]:
    return np.clip(np.rint(x / lat.eps), -lat.n, lat.n).astype(np.intp)


def _transverse(axis: int) -> tuple[int, int]:
    a, b = (d for d in AXES if d != axis)
    return a, b


def _evaluate_on_plane(
    phi: SmoothTestFunction, grid: GridSpec, axis: int, x: float
) -> FloatArray:
    """``phi`` on the transverse nodes of the plane ``x_axis = x``."""
    a, b = _transverse(axis)
    args: list[FloatArray] = [np.empty(0)] * 3
    args[axis] = np.array(x)
    args[a] = grid.axes[a].coords[:, None]
    args[b] = grid.axes[b].coords[None, :]
    return np.broadcast_to(phi(*args), (grid.axes[a].n_nodes, grid.axes[b].n_nodes))


def _along(values_1d: FloatArray, axis: int) -> FloatArray:
    shape = [1, 1, 1]
    shape[axis] = -1
    return values_1d.reshape(shape)


def region_measure(region: Region, lat: LatticeParams) -> float:
    """Exact measure of ``region``; control regions use the control slabs."""
    if region.kind == "omega":
        return 1.0
    report = control_measures(lat) if region.kind.startswith("control") else measures(lat)
    return float(report.measure(region))


def mean_product(
    u: ScalarField, v: ScalarField, region: Region, lat: LatticeParams
) -> float:
    """``(1/|E|) int_E u v`` with the exact measure of ``E``.

    Raises:
        ValueError: If the region has zero measure.
    """
    measure = region_measure(region, lat)
    if measure <= 0:
        raise ValueError(f"region {region} has zero measure in a {lat.mode.value} lattice")
    mask = u.grid.cell_mask(region, lat)
    return u.inner(v, mask) / measure


def restricted_mean_square(u: ScalarField, region: Region, lat: LatticeParams) -> float:
    """Mean of ``|u|^2`` over ``region``."""
    return mean_product(u, u, region, lat)


def slice_average(u: ScalarField, i: int, lat: LatticeParams) -> BandedField:
    """Band-wise mean of the two layer-face traces along axis ``i``.

    On the band ``|x_i - eps k| < eps/2`` the result is
    ``(u|_{x_i = eps k - r_i} + u|_{x_i = eps k + r_i}) / 2``, constant in ``x_i``.

    Raises:
        ValueError: If the axis has no layers, ``u`` is discontinuous, or a layer
            face is not a grid plane.
    """
    if i not in lat.active_axes:
        raise ValueError(f"axis {i} carries no layers in a {lat.mode.value} lattice")
    if not u.is_continuous:
        raise ValueError("slice averages are defined for continuous fields")
    grid = u.grid
    traces = []
    for lo, hi in layer_faces(lat, i):
        j_lo, j_hi = _plane_index(grid, i, lo), _plane_index(grid, i, hi)
        traces.append(0.5 * np.take(u.values, j_lo, axis=i) + 0.5 * np.take(u.values, j_hi, axis=i))
    _warn_unless_aligned(grid, i, band_faces(lat), "band boundary")
    cell_band = _nearest_k(grid.axes[i].centers, lat) + lat.n
    return BandedField.from_traces(grid, i, cell_band, np.stack(traces))


def capacitary(lat: LatticeParams, i: int, grid: GridSpec) -> ScalarField:
    """Capacitary profile ``w^i``: ``1 - r/R`` on the layers, linear decay to
    zero at the control faces, zero elsewhere. Zero on inactive axes."""
    if i not in lat.active_axes:
        return ScalarField(grid, np.zeros(grid.shape))
    r, R = lat.r_float(i), lat.R_float(i)
    _warn_unless_aligned(grid, i, [x for face in layer_faces(lat, i, R) for x in face], "control")
    x = grid.axes[i].coords
    d = np.abs(x - _nearest_k(x, lat) * lat.eps)
    profile = np.where(d <= r, 1.0 - r / R, np.where(d < R, 1.0 - d / R, 0.0))
    values = np.array(np.broadcast_to(_along(profile, i), grid.shape))
    return ScalarField(grid, values)


def step_approx(phi: SmoothTestFunction, i: int, lat: LatticeParams, grid: GridSpec) -> BandedField:
    """``phi`` frozen to its trace on ``x_i = eps k`` inside each control slab
    ``|x_i - eps k| < R_i``, zero outside the slabs."""
    a, b = _transverse(i)
    zero = np.zeros((1, grid.axes[a].n_nodes, grid.axes[b].n_nodes))
    n_cells = grid.axes[i].n_cells
    if i not in lat.active_axes:
        return BandedField.from_traces(grid, i, np.zeros(n_cells, dtype=np.intp), zero)
    traces = [_evaluate_on_plane(phi, grid, i, plane(k, 0.0, lat.eps)) for k in lat.ks]
    centers = grid.axes[i].centers
    k = _nearest_k(centers, lat)
    inside = np.abs(centers - k * lat.eps) < lat.R_float(i)
    cell_band = np.where(inside, k + lat.n + 1, 0).astype(np.intp)
    return BandedField.from_traces(grid, i, cell_band, np.concatenate((zero, np.stack(traces))))


def _step_nodal(phi: SmoothTestFunction, i: int, lat: LatticeParams, grid: GridSpec) -> FloatArray:
    """Nodal samples of the step approximation (interior of each slab)."""
    x = grid.axes[i].coords
    k = _nearest_k(x, lat)
    inside = np.abs(x - k * lat.eps) < lat.R_float(i)
    frozen = np.where(inside, k * lat.eps, x)
    coords = list(grid.node_coords())
    coords[i] = _along(frozen, i)
    return np.broadcast_to(phi(*coords) * _along(inside.astype(float), i), grid.shape)


def corrector(phi: SmoothTestFunction, lat: LatticeParams, grid: GridSpec) -> ScalarField:
    """Oscillating part ``sum_i (phi^i - phi) w^i`` of the test field."""
    phi_nodes = np.broadcast_to(phi(*grid.node_coords()), grid.shape)
    total = np.zeros(grid.shape)
    for i in lat.active_axes:
        total += (_step_nodal(phi, i, lat, grid) - phi_nodes) * capacitary(lat, i, grid).values
    return ScalarField(grid, total)


def test_function(phi: SmoothTestFunction, lat: LatticeParams, grid: GridSpec) -> ScalarField:
    """Oscillating test field ``v = sum_i [(1 - r_i/R_i) phi + (phi^i - phi) w^i]``.

    The sum runs over the active axes. ``v`` is continuous because ``w^i``
    vanishes where the step approximation jumps.
    """
    phi_nodes = np.broadcast_to(phi(*grid.node_coords()), grid.shape)
    weight = math.fsum(1.0 - lat.r_float(i) / lat.R_float(i) for i in lat.active_axes)
    total = weight * phi_nodes + corrector(phi, lat, grid).values
    dirichlet = bool(phi.cutoff and not np.any(total[grid.boundary_mask]))
    return ScalarField(grid, total, dirichlet=dirichlet)


def verify_slice_bounds(
    u: ScalarField, lat: LatticeParams, i: int, *, tol_factor: float = DISCRETE_TOLERANCE
) -> tuple[InequalityReport, InequalityReport, InequalityReport]:
    """Slice-average properties along axis ``i``.

    * ``slice-deviation``: mean of ``|G - u|^2`` over the layers is at most
      ``r_i |d_i u|^2``;
    * ``slice-mean``: mean of ``|G|^2`` over the layers equals ``|G|^2`` over
      the cube;
    * ``slice-l2``: ``|G - u| <= eps |d_i u|``.
    """
    g = slice_average(u, i, lat)
    deviation = g - u
    layer = Region.layer(i)
    grad_sq = u.gradient_inner(u, i)
    return (
        InequalityReport(
            name=f"slice-deviation({i})",
            lhs=mean_product(deviation, deviation, layer, lat),
            rhs=lat.r_float(i) * grad_sq,
            tol_factor=tol_factor,
        ),
        InequalityReport(
            name=f"slice-mean({i})",
            lhs=mean_product(g, g, layer, lat),
            rhs=g.inner(g),
            kind="eq",
        ),
        InequalityReport(
            name=f"slice-l2({i})",
            lhs=math.sqrt(max(deviation.inner(deviation), 0.0)),
            rhs=lat.eps * math.sqrt(grad_sq),
            tol_factor=tol_factor,
        ),
    )


def trace_factors(lat: LatticeParams) -> dict[Region, float]:
    """Scaling factors of the layer, pair and triple trace estimates."""
    eps = lat.eps
    factors: dict[Region, float] = {Region.union(): 1.0}
    for i, j in lat.active_pairs:
        logs = (eps**2 * math.log(1.0 / lat.r_float(i)), eps**2 * math.log(1.0 / lat.r_float(j)))
        factors[Region.pair(i, j)] = max(1.0, *logs)
    if lat.active_axes == AXES:
        factors[Region.triple()] = max(1.0, eps**3 / lat.r_min)
    return factors


def verify_trace_bounds(
    u: ScalarField,
    lat: LatticeParams,
    *,
    constant: float = 1.0,
    tol_factor: float = DISCRETE_TOLERANCE,
) -> list[InequalityReport]:
    """Mean of ``|u|^2`` over the union, each pair and the triple intersection
    against ``constant * factor * |grad u|^2``.

    Raises:
        ValueError: If ``u`` is not flagged as vanishing on the boundary.
    """
    if not u.dirichlet:
        raise ValueError("trace estimates apply to fields that vanish on the boundary")
    grad_sq = u.energy()
    reports = []
    for region, factor in trace_factors(lat).items():
        reports.append(
            InequalityReport(
                name=f"trace-{region}",
                lhs=restricted_mean_square(u, region, lat),
                rhs=constant * factor * grad_sq,
                tol_factor=tol_factor,
            )
        )
    return reports


def verify_capacitary_bounds(
    lat: LatticeParams,
    phi: SmoothTestFunction,
    grid: GridSpec,
    *,
    axis: Optional[int] = None,
    tol_factor: float = DISCRETE_TOLERANCE,
) -> list[InequalityReport]:
    """Energy of ``w^i``, sup distance of the step approximation and its energy.

    * ``capacitary-energy``: ``|grad w^i|`` over the control union is at most
      ``(2 / (eps R_i))^(1/2)``;
    * ``step-sup``: ``max |phi - phi^i|`` over the slabs is at most
      ``R_i |grad phi|_inf``;
    * ``step-energy``: ``|grad phi^i|`` over the control union is at most
      ``(2 R_i / eps)^(1/2) |grad phi|_inf``.
    """
    axes = lat.active_axes if axis is None else (axis,)
    control = grid.cell_mask(Region.control_union(), lat)
    sup_grad = phi.sup_gradient
    phi_nodes = np.broadcast_to(phi(*grid.node_coords()), grid.shape)
    reports = []
    for i in axes:
        R = lat.R_float(i)
        w = capacitary(lat, i, grid)
        step = step_approx(phi, i, lat, grid)
        x = grid.axes[i].coords
        in_slab = np.abs(x - _nearest_k(x, lat) * lat.eps) < R
        gap = np.abs(phi_nodes - _step_nodal(phi, i, lat, grid))
        gap = np.where(np.broadcast_to(_along(in_slab, i), grid.shape), gap, 0.0)
        reports += [
            InequalityReport(
                name=f"capacitary-energy({i})",
                lhs=math.sqrt(max(w.energy(mask=control), 0.0)),
                rhs=math.sqrt(2.0 / (lat.eps * R)),
                tol_factor=tol_factor,
            ),
            InequalityReport(
                name=f"step-sup({i})",
                lhs=float(gap.max(initial=0.0)),
                rhs=R * sup_grad,
                tol_factor=tol_factor,
            ),
            InequalityReport(
                name=f"step-energy({i})",
                lhs=math.sqrt(max(step.energy(mask=control), 0.0)),
                rhs=math.sqrt(2.0 * R / lat.eps) * sup_grad,
                tol_factor=tol_factor,
            ),
        ]
    return reports


def intersection_bound(lat: LatticeParams) -> float:
    """Order ``(r / eps)^(1/2)`` of the layer intersection contribution, ``r = min r_i``."""
    return math.sqrt(lat.r_min / lat.eps)


def control_rate(lat: LatticeParams, phi: SmoothTestFunction) -> float:
    """``|grad phi|_inf sum_i (R_i / eps)^(1/2)``, the order of ``|grad v|`` on the control zone."""
    return phi.sup_gradient * math.fsum(math.sqrt(lat.R_float(i) / lat.eps) for i in lat.active_axes)


def _pair_masks(grid: GridSpec, lat: LatticeParams) -> dict[tuple[int, int], NDArray[np.bool_]]:
    return {(i, j): grid.cell_mask(Region.pair(i, j), lat) for i, j in lat.active_pairs}


def verify_intersection_bounds(
    u_eps: ScalarField,
    v: ScalarField,
    lat: LatticeParams,
    b: float,
    *,
    tol_factor: float = DISCRETE_TOLERANCE,
) -> list[InequalityReport]:
    """Layer term over each pairwise intersection against its Cauchy-Schwarz bound.

    ``lhs = b/|T| |int_{T^ij} grad u . grad v|`` and
    ``rhs = b (int_{T^ij} |grad u|^2 / |T|)^(1/2) (int_{T^ij} |grad v|^2 / |T^ij|)^(1/2) (|T^ij| / |T|)^(1/2)``.
    The last factor is of order ``(r / eps)^(1/2)``, so ``rhs`` vanishes with
    ``eps`` while the energy of ``u`` over the layers stays bounded.
    """
    report = measures(lat)
    union = float(report.union)
    reports = []
    for (i, j), mask in _pair_masks(u_eps.grid, lat).items():
        pair = float(report.pair[(i, j)])
        grad_u = max(u_eps.energy(mask=mask), 0.0)
        grad_v = max(v.energy(mask=mask), 0.0)
        reports.append(
            InequalityReport(
                name=f"intersection({i},{j})",
                lhs=b / union * abs(u_eps.energy(v, mask=mask)),
                rhs=b * math.sqrt(grad_u / union) * math.sqrt(grad_v / pair) * math.sqrt(pair / union),
                tol_factor=tol_factor,
            )
        )
    return reports


def energy_diagnostics(
    u_eps: ScalarField,
    phi: SmoothTestFunction,
    lat: LatticeParams,
    a: float,
    b: float,
    f: SourceSpec,
    *,
    reference: Optional[ScalarField] = None,
) -> list[EnergyTerm]:
    """Terms of the energy balance tested against ``v = test_function(phi)``.

    * ``ambient``: ``a int_{Omega \\ T} grad u . grad v``;
    * ``ambient_outside``: ``a sum_i (1 - r_i/R_i) int_{Omega \\ C} grad u . grad phi``,
      the part of ``ambient`` that survives in the limit;
    * ``control_ambient``: ``ambient`` restricted to the control zone;
    * ``control_grad``: ``|grad v|`` over the control zone;
    * ``corrector_grad``: ``|grad sum_i (phi^i - phi) w^i|`` over the control
      zone, the part of ``control_grad`` bounded by ``control_rate``;
    * ``layer``: ``b/|T| int_T grad u . grad v`` and ``intersection``, the same
      restricted to pairwise intersections, next to ``intersection_bound``
      and their ratio;
    * ``source``: ``<f, v>``, tending to ``N <f, phi>``, and ``source_defect``,
      the distance between the two;
    * ``balance``: ambient + layer - source.

    With ``reference`` (the homogenized solution on the same grid) the ambient
    terms carry the limit ``N a int grad u . grad phi`` and the layer term
    ``b sum_i (1 - m_i) int d_i u d_i phi``. ``N`` is the number of layer
    families.
    """
    grid = u_eps.grid
    v = test_function(phi, lat, grid)
    phi_h = ScalarField.from_function(grid, phi)
    n_families = len(lat.active_axes)
    weight = math.fsum(1.0 - lat.r_float(i) / lat.R_float(i) for i in lat.active_axes)
    union = grid.cell_mask(Region.union(), lat)
    control = grid.cell_mask(Region.control_union(), lat)
    pairs = np.zeros(grid.cell_shape, dtype=bool)
    for mask in _pair_masks(grid, lat).values():
        pairs |= mask
    report = measures(lat)
    layer_value = b / float(report.union)

    ambient = a * u_eps.energy(v, mask=~union)
    ambient_outside = a * weight * u_eps.energy(phi_h, mask=~control)
    control_ambient = a * u_eps.energy(v, mask=control & ~union)
    oscillating = corrector(phi, lat, grid)
    layer = layer_value * u_eps.energy(v, mask=union)
    intersection = layer_value * abs(u_eps.energy(v, mask=pairs)) if lat.active_pairs else 0.0
    bound = intersection_bound(lat)
    coords = gauss_coordinates(grid)
    f_gauss = f(*coords)
    source = gauss_integral(grid, f_gauss * at_gauss(v.corners))
    source_limit = n_families * gauss_integral(grid, f_gauss * phi(*coords))

    ambient_limit = layer_limit = None
    if reference is not None:
        ambient_limit = n_families * a * reference.energy(phi_h)
        m = report.fractions_limit
        layer_limit = b * math.fsum(
            (1.0 - float(m[i])) * reference.gradient_inner(phi_h, i) for i in lat.active_axes
        )
    terms = [
        EnergyTerm(name="ambient", value=ambient, limit=ambient_limit),
        EnergyTerm(name="ambient_outside", value=ambient_outside, limit=ambient_limit),
        EnergyTerm(name="control_ambient", value=control_ambient, limit=0.0),
        EnergyTerm(name="control_grad", value=math.sqrt(max(v.energy(mask=control), 0.0)), limit=0.0),
        EnergyTerm(name="corrector_grad", value=math.sqrt(max(oscillating.energy(mask=control), 0.0)), limit=0.0),
        EnergyTerm(name="control_rate", value=control_rate(lat, phi), limit=0.0),
        EnergyTerm(name="layer", value=layer, limit=layer_limit),
        EnergyTerm(name="intersection", value=intersection, limit=0.0),
        EnergyTerm(name="intersection_bound", value=bound, limit=0.0),
        EnergyTerm(name="intersection_ratio", value=intersection / bound if bound > 0 else 0.0),
        EnergyTerm(name="source", value=source, limit=source_limit),
        EnergyTerm(name="source_defect", value=abs(source - source_limit), limit=0.0),
        EnergyTerm(name="balance", value=ambient + layer - source, limit=0.0),
    ]
    logger.debug("energy terms n=%d %s", lat.n, {t.name: t.value for t in terms})
    return terms


def layer_means(u_eps: ScalarField, v: ScalarField, lat: LatticeParams) -> list[EnergyTerm]:
    """Layer means of ``u v`` next to ``int u v``, plus the intersection weights.

    ``mean(union)`` and each ``mean(layer(i))`` tend to ``int u v``; the
    weights ``|T^ij| / |T|`` and ``|T^0| / |T|`` tend to zero.
    """
    whole = u_eps.inner(v)
    terms = [EnergyTerm(name="mean(union)", value=mean_product(u_eps, v, Region.union(), lat), limit=whole)]
    for i in lat.active_axes:
        terms.append(
            EnergyTerm(name=f"mean(layer({i}))", value=mean_product(u_eps, v, Region.layer(i), lat), limit=whole)
        )
    report = measures(lat)
    union = float(report.union)
    for i, j in lat.active_pairs:
        terms.append(EnergyTerm(name=f"weight(pair({i},{j}))", value=float(report.pair[(i, j)]) / union, limit=0.0))
    if lat.active_axes == AXES:
        terms.append(EnergyTerm(name="weight(triple)", value=float(report.triple) / union, limit=0.0))
    terms.append(EnergyTerm(name="omega", value=whole))
    return terms


def slice_deviation(u: ScalarField, lat: LatticeParams) -> list[float]:
    """``|G^i(u) - u|`` in L2 for each active axis."""
    out = []
    for i in lat.active_axes:
        d = slice_average(u, i, lat) - u
        out.append(math.sqrt(max(d.inner(d), 0.0)))
    return out
