"""Periodic layer structure on the unit cube: membership, measures, sampling.

The domain is ``Omega = (-1/2, 1/2)^3``. For ``n >= 1`` the period is
``eps = 1/(2n+1)`` and the lattice planes normal to axis ``i`` sit at
``eps * k`` for ``|k| <= n``. Layer ``T^i_{eps,k}`` is the slab
``|x_i - eps k| < r_i`` and its control slab ``C^i_{eps,k}`` is
``|x_i - eps k| < R_i``.

Axes are numbered 0, 1, 2 throughout the package.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations
from typing import Literal, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

Number = Union[float, Fraction]
Triple = tuple[Number, Number, Number]

AXES = (0, 1, 2)
PAIRS = ((0, 1), (0, 2), (1, 2))


class Mode(str, Enum):
    """Which layer families are present."""

    RETICULATED = "reticulated"
    GRIDWORK = "gridwork"


ControlRule = Literal["geometric_mean", "power", "fraction"]


@dataclass(frozen=True)
class LatticeParams:
    """Validated parameters of an eps-periodic layer structure.

    Attributes:
        n: Number of lattice planes on each side of the center plane.
        r: Layer half-thicknesses per axis.
        R: Control half-widths per axis (ignored on inactive axes).
        mode: Reticulated (three families) or gridwork (axes 0 and 1 only).
    """

    n: int
    r: Triple
    R: Triple
    mode: Mode = Mode.RETICULATED

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if len(self.r) != 3 or len(self.R) != 3:
            raise ValueError("r and R must be triples")
        object.__setattr__(self, "mode", Mode(self.mode))
        half = self.epsilon / 2
        for axis in AXES:
            r_i, R_i = self.r[axis], self.R[axis]
            if r_i < 0 or R_i < 0:
                raise ValueError(
                    f"negative half-width on axis {axis}: r={r_i!r}, R={R_i!r}"
                )
            if axis not in self.active_axes:
                if r_i != 0:
                    raise ValueError(
                        f"gridwork lattice requires r[2] == 0, got {r_i!r}"
                    )
                continue
            if r_i == 0:
                raise ValueError(
                    f"{self.mode.value} lattice requires r[{axis}] > 0"
                )
            if not r_i < R_i:
                raise ValueError(
                    f"layer must sit inside its control zone on axis {axis}: "
                    f"r={r_i!r} >= R={R_i!r}"
                )
            if not R_i < half:
                raise ValueError(
                    f"control half-width must be below eps/2 = {float(half):.6g} "
                    f"on axis {axis}, got R={R_i!r}"
                )

    @property
    def epsilon(self) -> Fraction:
        """Exact period ``1/(2n+1)``."""
        return Fraction(1, 2 * self.n + 1)

    @property
    def eps(self) -> float:
        """Period as a float."""
        return 1.0 / (2 * self.n + 1)

    @property
    def active_axes(self) -> tuple[int, ...]:
        return AXES if self.mode is Mode.RETICULATED else (0, 1)

    @property
    def active_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(combinations(self.active_axes, 2))

    @property
    def ks(self) -> range:
        return range(-self.n, self.n + 1)

    @property
    def centers(self) -> NDArray[np.float64]:
        """Lattice plane positions ``eps * k`` as floats."""
        return np.array([k * self.eps for k in self.ks])

    @property
    def r_min(self) -> float:
        """Common thickness order ``min_i r_i`` over active axes."""
        return float(min(self.r[i] for i in self.active_axes))

    def r_float(self, axis: int) -> float:
        return float(self.r[axis])

    def R_float(self, axis: int) -> float:
        return float(self.R[axis])


def make_lattice(
    n: int, r: Sequence[Number], R: Sequence[Number], mode: Mode | str
) -> LatticeParams:
    """Build validated lattice parameters.

    Raises:
        ValueError: If a half-width is negative, a layer does not fit inside its
            control zone, a control zone reaches ``eps/2``, or the thickness
            triple does not match the mode.
    """
    return LatticeParams(n=n, r=tuple(r), R=tuple(R), mode=Mode(mode))  # type: ignore[arg-type]


def control_width(
    r_i: Number, epsilon: Number, rule: ControlRule = "geometric_mean", theta: float = 0.5
) -> float:
    """Control half-width for a layer of half-thickness ``r_i``.

    ``geometric_mean`` uses ``sqrt(r eps)`` and ``power`` uses
    ``eps (r / eps)^theta``; both fall back to the midpoint of ``(r, eps/2)``
    when they would reach ``eps/2``. ``fraction`` places ``R`` at
    ``r + theta (eps/2 - r)``.

    With ``r = c eps^2`` and ``theta = 2/3`` the ratio ``R / eps`` decreases
    from ``n = 1`` on; the geometric mean falls back at ``n = 1`` to a value
    below its ``n = 2`` ratio.
    """
    r_f, eps_f = float(r_i), float(epsilon)
    if r_f <= 0:
        return 0.0
    if rule == "fraction":
        if not 0 < theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {theta}")
        return r_f + theta * (eps_f / 2 - r_f)
    if rule == "power":
        if not 0 < theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {theta}")
        R_i = eps_f * (r_f / eps_f) ** theta
    else:
        R_i = math.sqrt(r_f * eps_f)
    if R_i >= eps_f / 2:
        R_i = (r_f + eps_f / 2) / 2
    return R_i


def lattice_from_law(
    n: int,
    c: Sequence[Number],
    exponent: Number,
    mode: Mode | str,
    *,
    rule: ControlRule = "geometric_mean",
    theta: float = 0.5,
) -> LatticeParams:
    """Lattice with thickness law ``r_i = c_i eps^p``.

    With ``p > 1`` the layers are thin relative to the period and the limit
    fractions are exactly ``c_i / sum_j c_j``. Integer exponents and rational
    coefficients keep ``r`` exact.
    """
    mode = Mode(mode)
    epsilon = Fraction(1, 2 * n + 1)
    if isinstance(exponent, float) and exponent.is_integer():
        exponent = int(exponent)
    if isinstance(exponent, (int, Fraction)) and Fraction(exponent).denominator == 1:
        scale: Number = epsilon ** int(exponent)
    else:
        scale = float(epsilon) ** float(exponent)
    r: list[Number] = []
    for axis in AXES:
        c_i = c[axis]
        if mode is Mode.GRIDWORK and axis == 2:
            r.append(0)
            continue
        r.append(c_i * scale if isinstance(c_i, (int, Fraction)) else float(c_i) * float(scale))
    R = [control_width(r_i, epsilon, rule, theta) for r_i in r]
    return make_lattice(n, r, R, mode)


def plane(k: int, offset: float, eps: float) -> float:
    """Coordinate ``eps k + offset``, computed so that ``plane(-k, -o) == -plane(k, o)``.

    Meshes and trace readers both go through this function, so exact float
    lookups of interface planes always succeed on mirrored grids.
    """
    x = abs(k) * eps + (offset if k >= 0 else -offset)
    return x if k >= 0 else -x


def layer_faces(lat: LatticeParams, axis: int, width: float | None = None) -> list[tuple[float, float]]:
    """Faces ``(eps k - w, eps k + w)`` for every ``k``, with ``w = r_axis`` by default."""
    w = lat.r_float(axis) if width is None else width
    return [(plane(k, -w, lat.eps), plane(k, w, lat.eps)) for k in lat.ks]


def band_faces(lat: LatticeParams) -> list[float]:
    """Interior boundaries ``eps (k + 1/2)`` between neighbouring period bands."""
    half = lat.eps / 2
    return [plane(k, half, lat.eps) for k in range(0, lat.n)] + [
        plane(-k, -half, lat.eps) for k in range(0, lat.n)
    ]


def _nearest_plane_offset(x: NDArray[np.float64], lat: LatticeParams) -> NDArray[np.float64]:
    k = np.clip(np.rint(x / lat.eps), -lat.n, lat.n)
    return np.abs(x - k * lat.eps)


def _as_points(p: ArrayLike) -> tuple[NDArray[np.float64], bool]:
    pts = np.asarray(p, dtype=float)
    if pts.shape[-1] != 3:
        raise ValueError(f"points must have a trailing dimension of 3, got {pts.shape}")
    return pts, pts.ndim == 1


def _finish(mask: NDArray[np.bool_], scalar: bool) -> bool | NDArray[np.bool_]:
    return bool(mask) if scalar else mask


def layer_mask(p: ArrayLike, axis: int, lat: LatticeParams) -> NDArray[np.bool_]:
    pts, _ = _as_points(p)
    r_i = lat.r_float(axis)
    if r_i <= 0:
        return np.zeros(pts.shape[:-1], dtype=bool)
    return _nearest_plane_offset(pts[..., axis], lat) < r_i


def control_mask(p: ArrayLike, axis: int, lat: LatticeParams) -> NDArray[np.bool_]:
    pts, _ = _as_points(p)
    if axis not in lat.active_axes:
        return np.zeros(pts.shape[:-1], dtype=bool)
    return _nearest_plane_offset(pts[..., axis], lat) < lat.R_float(axis)


def in_layer(p: ArrayLike, axis: int, lat: LatticeParams) -> bool | NDArray[np.bool_]:
    """True iff some ``k`` has ``|p_axis - eps k| < r_axis``. Vectorized over points."""
    _, scalar = _as_points(p)
    return _finish(layer_mask(p, axis, lat), scalar)


def in_union(p: ArrayLike, lat: LatticeParams) -> bool | NDArray[np.bool_]:
    _, scalar = _as_points(p)
    mask = np.logical_or.reduce([layer_mask(p, i, lat) for i in lat.active_axes])
    return _finish(mask, scalar)


def in_pair(p: ArrayLike, i: int, j: int, lat: LatticeParams) -> bool | NDArray[np.bool_]:
    _, scalar = _as_points(p)
    return _finish(layer_mask(p, i, lat) & layer_mask(p, j, lat), scalar)


def in_triple(p: ArrayLike, lat: LatticeParams) -> bool | NDArray[np.bool_]:
    _, scalar = _as_points(p)
    mask = np.logical_and.reduce([layer_mask(p, i, lat) for i in AXES])
    return _finish(mask, scalar)


def in_control(p: ArrayLike, axis: int, lat: LatticeParams) -> bool | NDArray[np.bool_]:
    _, scalar = _as_points(p)
    return _finish(control_mask(p, axis, lat), scalar)


RegionKind = Literal["omega", "union", "layer", "pair", "triple", "control", "control_union"]


@dataclass(frozen=True)
class Region:
    """A named subset of the domain built from layers or control slabs."""

    kind: RegionKind
    axes: tuple[int, ...] = ()

    @classmethod
    def omega(cls) -> Region:
        return cls("omega")

    @classmethod
    def union(cls) -> Region:
        return cls("union")

    @classmethod
    def layer(cls, axis: int) -> Region:
        return cls("layer", (axis,))

    @classmethod
    def pair(cls, i: int, j: int) -> Region:
        return cls("pair", (min(i, j), max(i, j)))

    @classmethod
    def triple(cls) -> Region:
        return cls("triple")

    @classmethod
    def control(cls, axis: int) -> Region:
        return cls("control", (axis,))

    @classmethod
    def control_union(cls) -> Region:
        return cls("control_union")

    @classmethod
    def parse(cls, text: str) -> Region:
        """Parse labels such as ``union``, ``layer(1)`` or ``pair(0,2)``."""
        text = text.strip().replace(" ", "")
        if "(" not in text:
            return cls(text)  # type: ignore[arg-type]
        kind, _, rest = text.partition("(")
        axes = tuple(int(a) for a in rest.rstrip(")").split(",") if a)
        return cls(kind, axes)  # type: ignore[arg-type]

    def __str__(self) -> str:
        if not self.axes:
            return self.kind
        return f"{self.kind}({','.join(str(a) for a in self.axes)})"

    def contains(self, p: ArrayLike, lat: LatticeParams) -> NDArray[np.bool_]:
        """Vectorized membership of points ``p`` (trailing dimension 3)."""
        pts, _ = _as_points(p)
        if self.kind == "omega":
            return np.ones(pts.shape[:-1], dtype=bool)
        if self.kind == "union":
            return np.logical_or.reduce([layer_mask(pts, i, lat) for i in lat.active_axes])
        if self.kind == "layer":
            return layer_mask(pts, self.axes[0], lat)
        if self.kind == "pair":
            i, j = self.axes
            return layer_mask(pts, i, lat) & layer_mask(pts, j, lat)
        if self.kind == "triple":
            return np.logical_and.reduce([layer_mask(pts, i, lat) for i in AXES])
        if self.kind == "control":
            return control_mask(pts, self.axes[0], lat)
        if self.kind == "control_union":
            return np.logical_or.reduce([control_mask(pts, i, lat) for i in lat.active_axes])
        raise ValueError(f"unknown region kind {self.kind!r}")


def standard_regions(lat: LatticeParams) -> list[Region]:
    """Union, every layer, every pair and the triple intersection, in fixed order."""
    regions = [Region.union()]
    regions += [Region.layer(i) for i in AXES]
    regions += [Region.pair(i, j) for i, j in PAIRS]
    regions.append(Region.triple())
    return regions


@dataclass(frozen=True)
class MeasureReport:
    """Closed-form measures of a slab structure.

    ``layer[i] = 2 h_i / eps``, ``pair[(i, j)] = 4 h_i h_j / eps^2``,
    ``triple = 8 h_0 h_1 h_2 / eps^3`` and ``union`` by inclusion-exclusion,
    where ``h`` are the slab half-widths. Values are exact fractions when the
    half-widths are rational.
    """

    layer: tuple[Number, Number, Number]
    pair: dict[tuple[int, int], Number]
    triple: Number
    union: Number
    fractions_eps: tuple[float, float, float]
    fractions_limit: tuple[Number, Number, Number]
    half_widths: tuple[Number, Number, Number] = field(repr=False)

    def measure(self, region: Region) -> Number:
        if region.kind == "omega":
            return 1
        if region.kind in ("union", "control_union"):
            return self.union
        if region.kind in ("layer", "control"):
            return self.layer[region.axes[0]]
        if region.kind == "pair":
            return self.pair[region.axes]  # type: ignore[index]
        if region.kind == "triple":
            return self.triple
        raise ValueError(f"no closed form for region {region}")


def _slab_measures(half_widths: Sequence[Number], epsilon: Fraction) -> MeasureReport:
    h = tuple(half_widths)
    layer = tuple(2 * h_i / epsilon for h_i in h)
    pair = {(i, j): layer[i] * layer[j] for i, j in PAIRS}
    triple = layer[0] * layer[1] * layer[2]
    union = sum(layer) - sum(pair.values()) + triple
    fractions_eps = tuple(float(m / union) if union else 0.0 for m in layer)
    total = sum(h)
    fractions_limit = tuple(h_i / total if total else 0 for h_i in h)
    return MeasureReport(
        layer=layer,  # type: ignore[arg-type]
        pair=pair,
        triple=triple,
        union=union,
        fractions_eps=fractions_eps,  # type: ignore[arg-type]
        fractions_limit=fractions_limit,  # type: ignore[arg-type]
        half_widths=h,  # type: ignore[arg-type]
    )


def measures(lat: LatticeParams) -> MeasureReport:
    """Exact measures of layers, pairwise and triple intersections and the union.

    The slabs of one family are disjoint and interior because ``r_i < eps/2``,
    so the union follows from inclusion-exclusion. Limit fractions follow the
    thickness law: ``m_i = r_i / sum_j r_j`` over active axes.
    """
    return _slab_measures(lat.r, lat.epsilon)


def control_measures(lat: LatticeParams) -> MeasureReport:
    """Measures of the control slabs ``C^i`` and their union ``C_eps``.

    ``fractions_*`` refer to control widths and carry no homogenization meaning.
    """
    widths = tuple(lat.R[i] if i in lat.active_axes else 0 for i in AXES)
    return _slab_measures(widths, lat.epsilon)


def _count_hits(
    lat: LatticeParams, region: Region, samples: int, seed: np.random.SeedSequence
) -> int:
    rng = np.random.Generator(np.random.Philox(seed))
    pts = rng.random((samples, 3)) - 0.5
    return int(np.count_nonzero(region.contains(pts, lat)))


def monte_carlo_measure(
    lat: LatticeParams,
    region: Region,
    samples: int,
    seed: int,
    *,
    chunk_size: int = 1 << 16,
    workers: int = 1,
) -> tuple[float, float]:
    """Uniform Monte Carlo estimate of a region's measure.

    Samples are split into fixed chunks, each drawn from a Philox stream spawned
    from ``seed``, so the estimate depends only on ``(samples, seed, chunk_size)``
    and not on ``workers``.

    Returns:
        ``(estimate, standard_error)`` with ``stderr = sqrt(p (1 - p) / N)``.
    """
    if samples < 10_000:
        raise ValueError(f"at least 10^4 samples are required, got {samples}")
    sizes = [chunk_size] * (samples // chunk_size)
    if samples % chunk_size:
        sizes.append(samples % chunk_size)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(lambda args: _count_hits(lat, region, *args), zip(sizes, seeds)))
    else:
        hits = sum(_count_hits(lat, region, size, s) for size, s in zip(sizes, seeds))
    estimate = hits / samples
    stderr = math.sqrt(estimate * (1.0 - estimate) / samples)
    logger.debug(
        "monte carlo region=%s samples=%d estimate=%.6g stderr=%.3g",
        region,
        samples,
        estimate,
        stderr,
    )
    return estimate, stderr
