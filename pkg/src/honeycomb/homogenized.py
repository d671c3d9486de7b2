"""Effective tensors and homogenized solutions."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional

import numpy as np

from honeycomb.fields import ScalarField
from honeycomb.functions import FloatArray, SourceSpec
from honeycomb.geometry import AXES, LatticeParams, Mode, Number, measures
from honeycomb.mesh import GridSpec
from honeycomb.pde import (
    ConductivityField,
    assemble,
    directional_energies,
    solve_cg,
    uniform_conductivity,
)
from honeycomb.types import SolveStats

logger = logging.getLogger(__name__)

TensorRule = Literal["effective", "laminate", "uniform"]

_LAYER_SHARE = {Mode.RETICULATED: Fraction(1, 3), Mode.GRIDWORK: Fraction(1, 2)}


def _exact(x: Number) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


@dataclass(frozen=True)
class EffectiveTensor:
    """Diagonal effective conductivity ``diag(A_0, A_1, A_2)``."""

    A: tuple[Number, Number, Number]
    mode: Mode
    a: Number
    b: Number
    m: tuple[Number, Number, Number]
    rule: TensorRule = "effective"

    @property
    def diagonal(self) -> tuple[float, float, float]:
        return float(self.A[0]), float(self.A[1]), float(self.A[2])

    @property
    def trace(self) -> float:
        return math.fsum(self.diagonal)

    @property
    def is_isotropic(self) -> bool:
        d = self.diagonal
        scale = max(abs(x) for x in d)
        return all(abs(x - d[0]) <= 1e-12 * scale for x in d)

    def csv_row(self) -> tuple[str | float, ...]:
        """Row ``mode,a,b,m1,m2,m3,A1,A2,A3``."""
        values = (self.a, self.b, *self.m, *self.A)
        return (self.mode.value, *(float(v) for v in values))


def validate_fractions(m: Sequence[Number], mode: Mode | str) -> tuple[Number, Number, Number]:
    """Check ``m_i >= 0``, ``sum m_i = 1`` and ``m_2 = 0`` for gridwork.

    Raises:
        ValueError: On any violation.
    """
    mode = Mode(mode)
    if len(m) != 3:
        raise ValueError(f"three fractions are required, got {len(m)}")
    if any(x < 0 for x in m):
        raise ValueError(f"fractions must be non-negative, got {tuple(m)}")
    total = sum(m)
    if abs(total - 1) > 1e-12:
        raise ValueError(f"fractions must sum to 1, got {float(total)!r}")
    if mode is Mode.GRIDWORK and m[2] != 0:
        raise ValueError(f"gridwork fractions need m[2] == 0, got {m[2]!r}")
    return m[0], m[1], m[2]


def effective_tensor(
    a: Number,
    b: Number,
    m: Sequence[Number],
    mode: Mode | str,
    *,
    rule: TensorRule = "effective",
    check: bool = True,
) -> EffectiveTensor:
    """Effective tensor of a layer structure with fractions ``m``.

    ``effective``: ``A_i = a + (b/3)(1 - m_i)`` (reticulated) or
    ``a + (b/2)(1 - m_i)`` (gridwork). ``laminate``: ``A_i = a + b (1 - m_i)``,
    the parallel mixture of thin layers. ``uniform``: ``A_i = a``.
    Integer and rational inputs give exact rational entries.
    """
    mode = Mode(mode)
    fractions = validate_fractions(m, mode) if check else (m[0], m[1], m[2])
    if a <= 0 or b < 0:
        raise ValueError(f"need a > 0 and b >= 0, got a={a!r}, b={b!r}")
    exact = all(_exact(x) for x in (a, b, *fractions))
    if rule == "uniform":
        share: Number = 0
    elif rule == "laminate":
        share = 1
    else:
        share = _LAYER_SHARE[mode]
    if not exact:
        share = float(share)
    A = tuple(a + share * b * (1 - m_i) for m_i in fractions)
    return EffectiveTensor(A=A, mode=mode, a=a, b=b, m=fractions, rule=rule)  # type: ignore[arg-type]


def lattice_tensor(
    lat: LatticeParams, a: Number, b: Number, *, rule: TensorRule = "effective", finite: bool = False
) -> EffectiveTensor:
    """Tensor from the lattice's limit fractions, or from the finite-eps
    fractions ``|T^i| / |T|`` when ``finite`` (these need not sum to 1)."""
    report = measures(lat)
    m = report.fractions_eps if finite else report.fractions_limit
    return effective_tensor(a, b, m, lat.mode, rule=rule, check=not finite)


def compare_modes(a: Number, b: Number) -> dict[Mode, EffectiveTensor]:
    """Reticulated and gridwork tensors for equally shared layer families."""
    third, half = Fraction(1, 3), Fraction(1, 2)
    return {
        Mode.RETICULATED: effective_tensor(a, b, (third, third, third), Mode.RETICULATED),
        Mode.GRIDWORK: effective_tensor(a, b, (half, half, 0), Mode.GRIDWORK),
    }


def _series(parts: Sequence[tuple[float, float]]) -> float:
    """Conductivity of ``(share, value)`` parts stacked in series."""
    resistance = 0.0
    for share, value in parts:
        if share > 0:
            if value == 0:
                return 0.0
            resistance += share / value
    return 1.0 / resistance


def cell_bounds(lat: LatticeParams, a: float, b: float) -> tuple[tuple[float, float], ...]:
    """Lower and upper bounds on the cell conductivity at finite ``eps``, per axis.

    The lower bound confines the flux to straight columns along the axis, each
    a series of ambient and layer material; the upper bound makes every slab
    across the axis isopotential, each slab a parallel mixture. Both tend to
    the laminate tensor ``a + b (1 - m_i)`` as ``eps -> 0``.
    """
    layer = b / float(measures(lat).union)
    share = [2.0 * lat.r_float(i) / lat.eps for i in AXES]
    bounds = []
    for i in AXES:
        j, k = (x for x in AXES if x != i)
        crossed = 1.0 - (1.0 - share[j]) * (1.0 - share[k])
        column = _series([(1.0 - share[i], a), (share[i], layer)])
        slab = crossed * layer + (1.0 - crossed) * a
        lower = crossed * layer + (1.0 - crossed) * column
        upper = _series([(share[i], layer), (1.0 - share[i], slab)])
        bounds.append((lower, upper))
    logger.debug("cell bounds n=%d %s", lat.n, bounds)
    return tuple(bounds)


@dataclass(frozen=True)
class AnalyticSolution:
    """``C cos(pi x) cos(pi y) cos(pi z)``."""

    amplitude: float

    def __call__(self, x: FloatArray, y: FloatArray, z: FloatArray) -> FloatArray:
        return self.amplitude * np.cos(math.pi * x) * np.cos(math.pi * y) * np.cos(math.pi * z)

    def gradient(
        self, x: FloatArray, y: FloatArray, z: FloatArray
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        cx, cy, cz = np.cos(math.pi * x), np.cos(math.pi * y), np.cos(math.pi * z)
        sx, sy, sz = np.sin(math.pi * x), np.sin(math.pi * y), np.sin(math.pi * z)
        k = -math.pi * self.amplitude
        return k * sx * cy * cz, k * cx * sy * cz, k * cx * cy * sz


def analytic_solution(tensor: EffectiveTensor, f: SourceSpec) -> AnalyticSolution:
    """Exact homogenized solution for ``f = A prod cos(pi x_i)``:
    ``u = A / (pi^2 (A_0 + A_1 + A_2)) prod cos(pi x_i)``.

    Raises:
        ValueError: If ``f`` is not a separable cosine.
    """
    if not f.is_separable_cosine:
        raise ValueError(f"closed-form solutions need a separable cosine source, got {f}")
    return AnalyticSolution(f.value / (math.pi**2 * tensor.trace))


def cosine_amplitude(tensor: EffectiveTensor, peak: float = 1.0) -> float:
    """Source amplitude whose homogenized solution is ``peak prod cos(pi x_i)``."""
    return peak * math.pi**2 * tensor.trace


def solve_homogenized(
    tensor: EffectiveTensor,
    f: SourceSpec,
    grid: GridSpec,
    *,
    rel_tol: float = 1e-10,
    max_iter: Optional[int] = None,
) -> tuple[ScalarField, SolveStats]:
    """Q1 solve of ``-sum_i A_i d_i^2 u = f`` with ``u = 0`` on the boundary."""
    sigma = uniform_conductivity(grid)
    system = assemble(grid, sigma, f, axis_scale=tensor.diagonal)
    return solve_cg(system, rel_tol=rel_tol, max_iter=max_iter)


def unit_gradient_energies(
    grid: GridSpec,
    sigma: Optional[ConductivityField] = None,
    axis_scale: Sequence[float] = (1.0, 1.0, 1.0),
    *,
    rel_tol: float = 1e-10,
    max_iter: Optional[int] = None,
) -> tuple[float, float, float]:
    """Energy of the Dirichlet problem with boundary data ``x_i``, per axis.

    For a constant diagonal tensor the discrete solution is ``x_i`` itself and
    the energy is ``A_i``; for a layered conductivity it measures the apparent
    conductivity along axis ``i``.
    """
    sigma = sigma or uniform_conductivity(grid)
    energies = []
    for axis in AXES:
        system = assemble(
            grid,
            sigma,
            None,
            axis_scale=axis_scale,
            boundary=lambda x, y, z, axis=axis: np.broadcast_arrays(x, y, z)[axis],
        )
        u, stats = solve_cg(system, rel_tol=rel_tol, max_iter=max_iter)
        energies.append(math.fsum(directional_energies(u, sigma, axis_scale)))
        logger.info("unit gradient axis=%d energy=%.6g iterations=%d", axis, energies[-1], stats.iterations)
    return energies[0], energies[1], energies[2]
