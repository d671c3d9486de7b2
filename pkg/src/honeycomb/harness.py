"""Experiment runners behind the command-line interface.

Each runner takes an :class:`~honeycomb.context.ExperimentConfig`, writes its
tables atomically into the output directory, keeps ``run.json`` current and
returns a :class:`CommandResult` with the number of failed internal checks.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from honeycomb.context import ExperimentConfig
from honeycomb.fields import ScalarField
from honeycomb.functions import SmoothTestFunction
from honeycomb.geometry import AXES, Mode, Region, measures, monte_carlo_measure, standard_regions
from honeycomb.homogenized import (
    EffectiveTensor,
    analytic_solution,
    cell_bounds,
    compare_modes,
    effective_tensor,
    lattice_tensor,
    solve_homogenized,
    unit_gradient_energies,
)
from honeycomb.ledger import RunLedger
from honeycomb.mesh import build_grid
from honeycomb.operators import (
    energy_diagnostics,
    layer_means,
    region_measure,
    slice_deviation,
    test_function,
    verify_capacitary_bounds,
    verify_intersection_bounds,
    verify_slice_bounds,
    verify_trace_bounds,
)
from honeycomb.pde import (
    ConvergenceError,
    analytic_h1_seminorm,
    analytic_l2_norm,
    assemble,
    conductivity_field,
    directional_energies,
    h1_error,
    h1_seminorm,
    l2_error,
    l2_norm,
    solve_cg,
)
from honeycomb.storage import write_table
from honeycomb.types import ConvergenceRecord, InequalityReport

logger = logging.getLogger(__name__)

SWEEP_HEADER = (
    "n",
    "eps",
    "dofs",
    "contrast",
    "iters",
    "l2_err",
    "h1_err",
    "grad_v_norm",
    "intersection_diag",
    "seconds",
)
INEQUALITY_HEADER = ("name", "lhs", "rhs", "slack", "pass")
TENSOR_HEADER = ("mode", "a", "b", "m1", "m2", "m3", "A1", "A2", "A3")
TENSORS_HEADER = ("rule",) + TENSOR_HEADER + ("isotropic",)
GRID_HEADER = ("axis", "index", "coord", "is_interface")
SOLUTION_HEADER = ("ix", "iy", "iz", "x", "y", "z", "value")
STATS_HEADER = ("dofs", "iters", "final_residual", "contrast")
MEASURES_HEADER = ("n", "eps", "region", "exact", "mc", "stderr", "z", "pass")
FRACTIONS_HEADER = ("n", "eps", "m1_eps", "m2_eps", "m3_eps", "m1", "m2", "m3", "union")
TERMS_HEADER = ("n", "term", "value", "limit", "defect")
DIRECTIONAL_HEADER = ("n", "axis", "slice_dev", "energy_fine", "energy_hom", "energy_unit")
BOUNDS_HEADER = ("n", "axis", "lower", "upper", "reference")

BALANCE_TOLERANCE = 1e-6
ENERGY_IDENTITY_TOLERANCE = 1e-8
FINAL_ERROR_RATIO = 2 / 3
ANISOTROPY_TOLERANCE = 0.25


@dataclass
class Table:
    title: str
    header: Sequence[str]
    rows: list[Sequence[Any]]


@dataclass
class CommandResult:
    """What a runner produced and whether its internal checks passed."""

    command: str
    out_dir: Path
    files: list[Path] = field(default_factory=list)
    checks_failed: int = 0
    tables: list[Table] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.checks_failed == 0


def _run(
    command: str,
    config: ExperimentConfig,
    out_dir: Optional[Path],
    body: Callable[[CommandResult, RunLedger], None],
) -> CommandResult:
    out = Path(out_dir) if out_dir is not None else config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    ledger = RunLedger(out)
    ledger.start(command, config.snapshot())
    result = CommandResult(command=command, out_dir=out)
    try:
        body(result, ledger)
    except ConvergenceError as exc:
        ledger.add_files(result.files)
        ledger.finish("aborted", str(exc))
        raise
    except Exception as exc:
        ledger.finish("failed", str(exc))
        raise
    ledger.add_files(result.files)
    ledger.record_checks(result.checks_failed)
    ledger.finish("completed", "; ".join(result.notes))
    logger.info("%s finished: %d files, %d failed checks", command, len(result.files), result.checks_failed)
    return result


def _emit(result: CommandResult, stem: str, title: str, header: Sequence[str], rows: list[Sequence[Any]]) -> None:
    result.files += write_table(result.out_dir, stem, header, rows)
    result.tables.append(Table(title, header, rows))


# -- measures ---------------------------------------------------------------


def run_measures(config: ExperimentConfig, out_dir: Optional[Path] = None) -> CommandResult:
    """Closed-form and Monte Carlo measures of every region at each sweep point."""

    def body(result: CommandResult, ledger: RunLedger) -> None:
        rows: list[Sequence[Any]] = []
        fraction_rows: list[Sequence[Any]] = []
        for n in config.n_values:
            lat = config.lattice(n)
            report = measures(lat)
            regions = standard_regions(lat) + [Region.control_union()]
            for region in regions:
                exact = region_measure(region, lat)
                mc, stderr = monte_carlo_measure(
                    lat,
                    region,
                    config.samples,
                    config.seed,
                    chunk_size=config.mc_chunk,
                    workers=config.workers,
                )
                sigma = max(stderr, math.sqrt(exact * (1.0 - exact) / config.samples))
                passed = abs(mc - exact) <= 3.0 * sigma if sigma > 0 else mc == exact
                z = (mc - exact) / sigma if sigma > 0 else 0.0
                result.checks_failed += not passed
                rows.append((n, lat.eps, str(region), exact, mc, stderr, z, passed))
            fraction_rows.append(
                (
                    n,
                    lat.eps,
                    *report.fractions_eps,
                    *(float(m) for m in report.fractions_limit),
                    float(report.union),
                )
            )
        _emit(result, "measures", "Measures", MEASURES_HEADER, rows)
        _emit(result, "fractions", "Volume fractions", FRACTIONS_HEADER, fraction_rows)

    return _run("measures", config, out_dir, body)


# -- effective tensors --------------------------------------------------------


def _tensor_bounds_ok(tensor: EffectiveTensor) -> bool:
    share = 1 / 3 if tensor.mode.value == "reticulated" else 1 / 2
    a, b = float(tensor.a), float(tensor.b)
    upper = a + share * b
    return all(a - 1e-12 <= x <= upper + 1e-12 for x in tensor.diagonal)


def run_effective(config: ExperimentConfig, out_dir: Optional[Path] = None) -> CommandResult:
    """Effective tensor of the configured structure plus comparison tensors."""

    def body(result: CommandResult, ledger: RunLedger) -> None:
        if config.fractions is not None:
            m: Sequence[Any] = config.fractions
        else:
            m = measures(config.lattice(config.n_values[0])).fractions_limit
        tensor = effective_tensor(config.a, config.b, m, config.mode)
        result.checks_failed += not _tensor_bounds_ok(tensor)
        _emit(result, "tensor", "Effective tensor", TENSOR_HEADER, [tensor.csv_row()])

        rows: list[Sequence[Any]] = []
        for rule in ("effective", "laminate", "uniform"):
            t = effective_tensor(config.a, config.b, m, config.mode, rule=rule)  # type: ignore[arg-type]
            rows.append((rule, *t.csv_row(), t.is_isotropic))
        for mode, t in compare_modes(config.a, config.b).items():
            rows.append((f"equal-shares:{mode.value}", *t.csv_row(), t.is_isotropic))
        if config.fractions is None:
            for n in config.n_values:
                t = lattice_tensor(config.lattice(n), config.a, config.b, finite=True)
                rows.append((f"finite(n={n})", *t.csv_row(), t.is_isotropic))
        _emit(result, "tensors", "Comparison tensors", TENSORS_HEADER, rows)
        result.notes.append(f"isotropic={'yes' if tensor.is_isotropic else 'no'}")

    return _run("effective", config, out_dir, body)


# -- single solve -----------------------------------------------------------


def run_solve(config: ExperimentConfig, out_dir: Optional[Path] = None) -> CommandResult:
    """Solve the fine-scale problem at the first sweep point and dump it."""

    def body(result: CommandResult, ledger: RunLedger) -> None:
        n = config.n_values[0]
        lat = config.lattice(n)
        grid = build_grid(lat, config.mesh_config())
        sigma = conductivity_field(lat, config.a, config.b, grid)
        tensor = lattice_tensor(lat, config.a, config.b, rule=config.reference)
        system = assemble(grid, sigma, config.source_spec(tensor))
        u, stats = solve_cg(system, config.rel_tol, config.max_iter)

        A = system.matrix
        x = u.values.reshape(-1)[system.free]
        xAx, xb = float(x @ (A @ x)), float(x @ system.rhs)
        identity_ok = abs(xAx - xb) <= ENERGY_IDENTITY_TOLERANCE * max(abs(xb), 1e-300)
        symmetric = (A != A.T).nnz == 0
        result.checks_failed += (not identity_ok) + (not symmetric)

        _emit(result, "grid", "Grid", GRID_HEADER, list(grid.csv_rows()))
        _emit(result, "solution", "Solution", SOLUTION_HEADER, list(u.csv_rows()))
        _emit(
            result,
            "stats",
            "Solver statistics",
            STATS_HEADER,
            [(stats.dofs, stats.iterations, stats.final_residual, sigma.contrast)],
        )
        ledger.add_record({"n": n, **stats.model_dump()})

    return _run("solve", config, out_dir, body)


# -- sweep ----------------------------------------------------------------------


@dataclass
class SweepPoint:
    record: ConvergenceRecord
    balance_ok: bool
    unit_energy: Optional[tuple[float, float, float]] = None
    homogenized_energy: tuple[float, float, float] = (0.0, 0.0, 0.0)
    intersections: list[InequalityReport] = field(default_factory=list)
    bounds: tuple[tuple[float, float], ...] = ()
    reference: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def term(self, name: str) -> float:
        return next(t.value for t in self.record.terms if t.name == name)


def _relative(error: float, norm: float) -> float:
    return error / norm if norm > 0 else error


def sweep_point(config: ExperimentConfig, n: int) -> SweepPoint:
    """Fine-scale solve at one ``n`` compared with the homogenized reference."""
    start = time.perf_counter()
    lat = config.lattice(n)
    grid = build_grid(lat, config.mesh_config(include_control=True))
    report = measures(lat)
    b = config.a * float(report.union) if config.match_contrast else config.b
    rule = "uniform" if config.match_contrast else config.reference
    sigma = conductivity_field(lat, config.a, b, grid)
    tensor = lattice_tensor(lat, config.a, b, rule=rule)
    f = config.source_spec(tensor)

    u, stats = solve_cg(assemble(grid, sigma, f), config.rel_tol, config.max_iter)
    if f.is_separable_cosine:
        exact = analytic_solution(tensor, f)
        u_hom = ScalarField.from_function(grid, exact, dirichlet=True)
        l2 = _relative(l2_error(u, exact), analytic_l2_norm(grid, exact))
        h1 = _relative(h1_error(u, exact), analytic_h1_seminorm(grid, exact))
    else:
        u_hom, _ = solve_homogenized(tensor, f, grid, rel_tol=config.rel_tol, max_iter=config.max_iter)
        l2 = _relative(l2_error(u, u_hom), l2_norm(u_hom))
        h1 = _relative(h1_error(u, u_hom), h1_seminorm(u_hom))

    phi = config.phi()
    terms = energy_diagnostics(u, phi, lat, config.a, b, f, reference=u_hom)
    terms += layer_means(u, u_hom, lat)
    by_name = {t.name: t for t in terms}
    balance = by_name["balance"].value
    scale = max(abs(by_name[k].value) for k in ("ambient", "layer", "source"))
    balance_ok = abs(balance) <= BALANCE_TOLERANCE * scale if scale > 0 else balance == 0
    v = test_function(phi, lat, grid)
    intersections = verify_intersection_bounds(u, v, lat, b, tol_factor=config.tol_factor)

    deviations = slice_deviation(u, lat)
    unit_energy = (
        unit_gradient_energies(grid, sigma, rel_tol=config.rel_tol, max_iter=config.max_iter)
        if config.unit_energies
        else None
    )
    seconds = time.perf_counter() - start if config.record_timing else 0.0
    record = ConvergenceRecord(
        n=n,
        eps=lat.eps,
        dofs=stats.dofs,
        contrast=sigma.contrast,
        iters=stats.iterations,
        l2_err=l2,
        h1_err=h1,
        grad_v_norm=by_name["corrector_grad"].value,
        intersection_diag=by_name["intersection"].value,
        seconds=seconds,
        terms=terms,
        slice_deviation=deviations,
        directional_energy=list(directional_energies(u, sigma)),
    )
    logger.info("sweep point n=%d dofs=%d iters=%d l2_err=%.4g", n, stats.dofs, stats.iterations, l2)
    return SweepPoint(
        record=record,
        balance_ok=balance_ok,
        unit_energy=unit_energy,
        homogenized_energy=directional_energies(u_hom, None, tensor.diagonal),
        intersections=intersections,
        bounds=cell_bounds(lat, config.a, b),
        reference=tensor.diagonal,
    )


def _term_rows(point: SweepPoint) -> list[Sequence[Any]]:
    rows: list[Sequence[Any]] = []
    for term in point.record.terms:
        limit = "" if term.limit is None else term.limit
        defect = "" if term.defect is None else term.defect
        rows.append((point.record.n, term.name, term.value, limit, defect))
    return rows


def _directional_rows(point: SweepPoint, active: Sequence[int]) -> list[Sequence[Any]]:
    rec = point.record
    deviations = dict(zip(active, rec.slice_deviation))
    rows: list[Sequence[Any]] = []
    for axis in AXES:
        unit = "" if point.unit_energy is None else point.unit_energy[axis]
        rows.append(
            (
                rec.n,
                axis,
                deviations.get(axis, ""),
                rec.directional_energy[axis],
                point.homogenized_energy[axis],
                unit,
            )
        )
    return rows


def _bounds_rows(point: SweepPoint) -> list[Sequence[Any]]:
    return [
        (point.record.n, axis, lower, upper, point.reference[axis])
        for axis, (lower, upper) in enumerate(point.bounds)
    ]


def _sweep_rows(points: list[SweepPoint]) -> list[Sequence[Any]]:
    return [
        tuple(getattr(p.record, name) for name in SWEEP_HEADER) for p in sorted(points, key=lambda p: p.record.n)
    ]


def _decreasing(
    name: str, points: Sequence[SweepPoint], value: Callable[[SweepPoint], float]
) -> list[InequalityReport]:
    return [
        InequalityReport(name=f"{name}(n={p.record.n}->{q.record.n})", lhs=value(q), rhs=value(p), kind="lt")
        for p, q in zip(points, points[1:])
    ]


def sweep_checks(config: ExperimentConfig, points: Sequence[SweepPoint]) -> list[InequalityReport]:
    """Sweep-level checks on points sorted by ``n``.

    * strict decrease of the relative L2 error and a final error at most
      ``FINAL_ERROR_RATIO`` of the first;
    * strict decrease of the corrector gradient on the control zone, of the
      intersection term and of the source pairing defect;
    * gridwork only: the ratio of the directional energies across and along
      the layers on the last point within ``ANISOTROPY_TOLERANCE`` of the
      reference tensor's ratio;
    * per point, the intersection terms against their bounds.

    A contrast-1 control run compares against the ambient tensor and only
    keeps the per-point checks.
    """
    checks = [
        report.model_copy(update={"name": f"{report.name}[n={p.record.n}]"})
        for p in points
        for report in p.intersections
    ]
    if config.match_contrast or len(points) < 2:
        return checks
    checks += _decreasing("l2-decreasing", points, lambda p: p.record.l2_err)
    checks.append(
        InequalityReport(
            name="l2-final-ratio",
            lhs=points[-1].record.l2_err,
            rhs=FINAL_ERROR_RATIO * points[0].record.l2_err,
        )
    )
    checks += _decreasing("corrector-grad-decreasing", points, lambda p: p.record.grad_v_norm)
    checks += _decreasing("intersection-decreasing", points, lambda p: p.record.intersection_diag)
    checks += _decreasing("source-defect-decreasing", points, lambda p: p.term("source_defect"))
    if config.mode is Mode.GRIDWORK:
        last = points[-1]
        fine = last.record.directional_energy[2] / last.record.directional_energy[0]
        predicted = last.homogenized_energy[2] / last.homogenized_energy[0]
        checks.append(
            InequalityReport(
                name=f"anisotropy[n={last.record.n}]",
                lhs=abs(fine - predicted),
                rhs=ANISOTROPY_TOLERANCE * predicted,
            )
        )
    return checks


def run_sweep(config: ExperimentConfig, out_dir: Optional[Path] = None) -> CommandResult:
    """Convergence study over ``config.n_values``.

    Points run concurrently when ``config.workers > 1``; records are sorted by
    ``n`` before they are written. Every failed row of ``checks.csv`` and every
    point whose energy balance does not close counts as a failed check. If a
    point fails to converge the completed points are still written, the
    manifest is marked ``aborted`` and the
    :class:`~honeycomb.pde.ConvergenceError` propagates.
    """

    def body(result: CommandResult, ledger: RunLedger) -> None:
        points: list[SweepPoint] = []
        failure: Optional[ConvergenceError] = None

        def finished(point: SweepPoint) -> None:
            points.append(point)
            ledger.add_record(point.record.model_dump(mode="json"))

        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = {pool.submit(sweep_point, config, n): n for n in config.n_values}
                for future in as_completed(futures):
                    try:
                        finished(future.result())
                    except ConvergenceError as exc:
                        logger.error("sweep point n=%d did not converge: %s", futures[future], exc)
                        failure = failure or exc
        else:
            for n in config.n_values:
                try:
                    finished(sweep_point(config, n))
                except ConvergenceError as exc:
                    logger.error("sweep point n=%d did not converge: %s", n, exc)
                    failure = exc
                    break

        points.sort(key=lambda p: p.record.n)
        active = config.lattice(config.n_values[0]).active_axes
        _emit(result, "sweep", "Sweep", SWEEP_HEADER, _sweep_rows(points))
        _emit(result, "energies", "Energy terms", TERMS_HEADER, [r for p in points for r in _term_rows(p)])
        _emit(
            result,
            "directional",
            "Directional energies",
            DIRECTIONAL_HEADER,
            [r for p in points for r in _directional_rows(p, active)],
        )
        _emit(result, "bounds", "Cell bounds", BOUNDS_HEADER, [r for p in points for r in _bounds_rows(p)])
        if failure is not None:
            _emit(result, "checks", "Sweep checks", INEQUALITY_HEADER, [])
            raise failure
        checks = sweep_checks(config, points)
        _emit(
            result,
            "checks",
            "Sweep checks",
            INEQUALITY_HEADER,
            [(c.name, c.lhs, c.rhs, c.slack, c.passed) for c in checks],
        )
        result.checks_failed += sum(not p.balance_ok for p in points)
        result.checks_failed += sum(not c.passed for c in checks)
        for check in checks:
            if not check.passed:
                logger.warning("sweep check failed: %s (lhs=%.6g rhs=%.6g)", check.name, check.lhs, check.rhs)
                result.notes.append(f"failed: {check.name}")

    return _run("sweep", config, out_dir, body)


# -- inequality suite -------------------------------------------------------


def _label(report: InequalityReport, n: int, fn: str) -> InequalityReport:
    return report.model_copy(update={"name": f"{report.name}[n={n},fn={fn}]"})


def verify_point(config: ExperimentConfig, n: int) -> list[InequalityReport]:
    """Run the inequality suite for every battery function at one ``n``.

    The intersection rows pair the fine-scale solution for the configured
    source with the test field of each battery function.
    """
    lat = config.lattice(n)
    grid = build_grid(lat, config.mesh_config(include_control=True))
    tol = config.tol_factor
    sigma = conductivity_field(lat, config.a, config.b, grid)
    f = config.source_spec(lattice_tensor(lat, config.a, config.b, rule=config.reference))
    u_eps, _ = solve_cg(assemble(grid, sigma, f), config.rel_tol, config.max_iter)
    reports: list[InequalityReport] = []
    for index, label in enumerate(config.battery):
        phi = SmoothTestFunction.named(label)
        v = test_function(phi, lat, grid)
        reports += [
            _label(r, n, label) for r in verify_intersection_bounds(u_eps, v, lat, config.b, tol_factor=tol)
        ]
        free = ScalarField.from_function(grid, phi.with_cutoff(False))
        for i in lat.active_axes:
            reports += [_label(r, n, label) for r in verify_slice_bounds(free, lat, i, tol_factor=tol)]
        clamped = ScalarField.from_function(grid, phi, dirichlet=True)
        reports += [
            _label(r, n, label)
            for r in verify_trace_bounds(clamped, lat, constant=config.trace_constant, tol_factor=tol)
        ]
        for r in verify_capacitary_bounds(lat, phi, grid, tol_factor=tol):
            if index == 0 or not r.name.startswith("capacitary"):
                reports.append(_label(r, n, label))
    logger.info("verify n=%d: %d checks", n, len(reports))
    return reports


def run_verify(config: ExperimentConfig, out_dir: Optional[Path] = None) -> CommandResult:
    """Measured inequalities over the test-function battery and sweep."""

    def body(result: CommandResult, ledger: RunLedger) -> None:
        rows: list[Sequence[Any]] = []
        for n in config.n_values:
            for report in verify_point(config, n):
                result.checks_failed += not report.passed
                rows.append((report.name, report.lhs, report.rhs, report.slack, report.passed))
        _emit(result, "inequalities", "Inequalities", INEQUALITY_HEADER, rows)

    return _run("verify-ops", config, out_dir, body)


COMMANDS: dict[str, Callable[[ExperimentConfig, Optional[Path]], CommandResult]] = {
    "measures": run_measures,
    "effective": run_effective,
    "solve": run_solve,
    "sweep": run_sweep,
    "verify-ops": run_verify,
}
