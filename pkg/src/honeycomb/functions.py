"""Closed-form test functions and source terms with exact gradients.

Test functions are finite sums of separable products of one-dimensional
factors (cubic polynomials, ``cos(pi m x)``, ``sin(2 pi m x)``), optionally
multiplied by a smooth plateau cutoff that equals 1 on ``[-rho0, rho0]^3`` and
vanishes outside ``(-rho1, rho1)^3``. With the cutoff they are compactly
supported in the unit cube and stand in for smooth test functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Literal, Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

FloatArray = NDArray[np.float64]
FactorKind = Literal["poly", "cos", "sin"]
SourceKind = Literal["constant", "cosine", "smooth"]


class Analytic(Protocol):
    """Anything evaluable at broadcastable coordinate arrays."""

    def __call__(self, x: ArrayLike, y: ArrayLike, z: ArrayLike) -> FloatArray: ...


class AnalyticWithGradient(Analytic, Protocol):
    def gradient(
        self, x: ArrayLike, y: ArrayLike, z: ArrayLike
    ) -> tuple[FloatArray, FloatArray, FloatArray]: ...


def _psi(t: FloatArray) -> FloatArray:
    safe = np.where(t > 0, t, 1.0)
    return np.where(t > 0, np.exp(-1.0 / safe), 0.0)


def _dpsi(t: FloatArray) -> FloatArray:
    safe = np.where(t > 0, t, 1.0)
    return np.where(t > 0, np.exp(-1.0 / safe) / safe**2, 0.0)


def smooth_step(u: ArrayLike) -> FloatArray:
    """C-infinity step: 0 for ``u <= 0``, 1 for ``u >= 1``."""
    u = np.asarray(u, dtype=float)
    p, q = _psi(u), _psi(1.0 - u)
    return p / (p + q)


def _smooth_step_derivative(u: FloatArray) -> FloatArray:
    p, q = _psi(u), _psi(1.0 - u)
    dp, dq = _dpsi(u), _dpsi(1.0 - u)
    return (dp * q + p * dq) / (p + q) ** 2


@dataclass(frozen=True)
class Factor:
    """One-dimensional factor of a separable term."""

    kind: FactorKind = "poly"
    coeffs: tuple[float, ...] = (1.0,)
    m: int = 1

    def __post_init__(self) -> None:
        if self.kind == "poly" and not 1 <= len(self.coeffs) <= 4:
            raise ValueError("polynomial factors have degree at most 3")
        if self.kind != "poly" and self.m < 0:
            raise ValueError(f"frequency must be non-negative, got {self.m}")

    def __call__(self, x: FloatArray) -> FloatArray:
        if self.kind == "cos":
            return np.cos(math.pi * self.m * x)
        if self.kind == "sin":
            return np.sin(2 * math.pi * self.m * x)
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def derivative(self, x: FloatArray) -> FloatArray:
        if self.kind == "cos":
            return -math.pi * self.m * np.sin(math.pi * self.m * x)
        if self.kind == "sin":
            w = 2 * math.pi * self.m
            return w * np.cos(w * x)
        return np.polynomial.polynomial.polyval(
            x, np.polynomial.polynomial.polyder(self.coeffs)
        ) * np.ones_like(x)


ONE = Factor()


@dataclass(frozen=True)
class SeparableTerm:
    coef: float
    factors: tuple[Factor, Factor, Factor] = (ONE, ONE, ONE)


@dataclass(frozen=True)
class SmoothTestFunction:
    """Sum of separable terms, optionally times the plateau cutoff."""

    terms: tuple[SeparableTerm, ...]
    cutoff: bool = True
    label: str = ""
    rho: tuple[float, float] = field(default=(0.3, 0.45))

    def __post_init__(self) -> None:
        rho0, rho1 = self.rho
        if not 0 < rho0 < rho1 < 0.5:
            raise ValueError(f"cutoff radii must satisfy 0 < rho0 < rho1 < 1/2, got {self.rho}")

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c: float = 1.0, *, cutoff: bool = True) -> SmoothTestFunction:
        return cls((SeparableTerm(c),), cutoff=cutoff, label="const" if c == 1.0 else f"const:{c!r}")

    @classmethod
    def coordinate(cls, axis: int, *, cutoff: bool = True) -> SmoothTestFunction:
        factors = [ONE, ONE, ONE]
        factors[axis] = Factor("poly", (0.0, 1.0))
        return cls((SeparableTerm(1.0, tuple(factors)),), cutoff=cutoff, label=f"x{axis}")  # type: ignore[arg-type]

    @classmethod
    def cosine_product(cls, amplitude: float = 1.0, *, cutoff: bool = True) -> SmoothTestFunction:
        cos = Factor("cos", m=1)
        return cls((SeparableTerm(amplitude, (cos, cos, cos)),), cutoff=cutoff, label="cos")

    @classmethod
    def mixed(cls, *, cutoff: bool = True) -> SmoothTestFunction:
        """``sin(2 pi x0) (1 + x1 + x1^3 / 2) cos(pi x2) + x0 x2 / 2``."""
        return cls(
            (
                SeparableTerm(
                    1.0,
                    (Factor("sin", m=1), Factor("poly", (1.0, 1.0, 0.0, 0.5)), Factor("cos", m=1)),
                ),
                SeparableTerm(0.5, (Factor("poly", (0.0, 1.0)), ONE, Factor("poly", (0.0, 1.0)))),
            ),
            cutoff=cutoff,
            label="mixed",
        )

    @classmethod
    def named(cls, label: str, *, cutoff: bool = True) -> SmoothTestFunction:
        """Build a battery member from its label (``const``, ``x0``, ``cos``, ``mixed``)."""
        label = label.strip()
        if label == "const":
            return cls.constant(cutoff=cutoff)
        if label.startswith("const:"):
            return cls.constant(float(label.partition(":")[2]), cutoff=cutoff)
        if label in ("x0", "x1", "x2"):
            return cls.coordinate(int(label[1]), cutoff=cutoff)
        if label == "cos":
            return cls.cosine_product(cutoff=cutoff)
        if label == "mixed":
            return cls.mixed(cutoff=cutoff)
        raise ValueError(f"unknown test function {label!r}")

    @classmethod
    def battery(cls, *, cutoff: bool = True) -> list[SmoothTestFunction]:
        """Constants, coordinates, separable cosines and a mixed product."""
        labels = ("const", "x0", "x1", "x2", "cos", "mixed")
        return [cls.named(label, cutoff=cutoff) for label in labels]

    def with_cutoff(self, cutoff: bool) -> SmoothTestFunction:
        return replace(self, cutoff=cutoff)

    # -- evaluation ---------------------------------------------------------

    def _chi(self, t: FloatArray) -> FloatArray:
        rho0, rho1 = self.rho
        return smooth_step((rho1 - np.abs(t)) / (rho1 - rho0))

    def _dchi(self, t: FloatArray) -> FloatArray:
        rho0, rho1 = self.rho
        width = rho1 - rho0
        return _smooth_step_derivative((rho1 - np.abs(t)) / width) * (-np.sign(t) / width)

    def _core(self, x: FloatArray, y: FloatArray, z: FloatArray) -> FloatArray:
        total = np.zeros(np.broadcast_shapes(x.shape, y.shape, z.shape))
        for term in self.terms:
            fx, fy, fz = term.factors
            total = total + term.coef * fx(x) * fy(y) * fz(z)
        return total

    def _core_gradient(
        self, x: FloatArray, y: FloatArray, z: FloatArray
    ) -> list[FloatArray]:
        shape = np.broadcast_shapes(x.shape, y.shape, z.shape)
        grad = [np.zeros(shape), np.zeros(shape), np.zeros(shape)]
        for term in self.terms:
            fx, fy, fz = term.factors
            vx, vy, vz = fx(x), fy(y), fz(z)
            grad[0] = grad[0] + term.coef * fx.derivative(x) * vy * vz
            grad[1] = grad[1] + term.coef * vx * fy.derivative(y) * vz
            grad[2] = grad[2] + term.coef * vx * vy * fz.derivative(z)
        return grad

    def __call__(self, x: ArrayLike, y: ArrayLike, z: ArrayLike) -> FloatArray:
        x, y, z = (np.asarray(c, dtype=float) for c in (x, y, z))
        value = self._core(x, y, z)
        if self.cutoff:
            value = value * self._chi(x) * self._chi(y) * self._chi(z)
        return value

    def gradient(
        self, x: ArrayLike, y: ArrayLike, z: ArrayLike
    ) -> tuple[FloatArray, FloatArray, FloatArray]:
        x, y, z = (np.asarray(c, dtype=float) for c in (x, y, z))
        grad = self._core_gradient(x, y, z)
        if not self.cutoff:
            return grad[0], grad[1], grad[2]
        g = self._core(x, y, z)
        cx, cy, cz = self._chi(x), self._chi(y), self._chi(z)
        bump = cx * cy * cz
        return (
            grad[0] * bump + g * self._dchi(x) * cy * cz,
            grad[1] * bump + g * cx * self._dchi(y) * cz,
            grad[2] * bump + g * cx * cy * self._dchi(z),
        )

    @cached_property
    def sup_gradient(self) -> float:
        """``max |grad phi|`` sampled on a 97^3 lattice of the closed cube."""
        t = np.linspace(-0.5, 0.5, 97)
        x, y, z = t[:, None, None], t[None, :, None], t[None, None, :]
        gx, gy, gz = self.gradient(x, y, z)
        return float(np.sqrt(gx**2 + gy**2 + gz**2).max())

    def __str__(self) -> str:
        return self.label or "phi"


@dataclass(frozen=True)
class SourceSpec:
    """Right-hand side ``f`` of the conduction problem."""

    kind: SourceKind
    value: float = 0.0
    function: SmoothTestFunction | None = None

    def __post_init__(self) -> None:
        if self.kind == "smooth" and self.function is None:
            raise ValueError("a smooth source needs a test function")

    @classmethod
    def constant(cls, c: float) -> SourceSpec:
        return cls("constant", c)

    @classmethod
    def cosine(cls, amplitude: float) -> SourceSpec:
        """``amplitude * cos(pi x) cos(pi y) cos(pi z)``."""
        return cls("cosine", amplitude)

    @classmethod
    def smooth(cls, function: SmoothTestFunction) -> SourceSpec:
        return cls("smooth", function=function)

    @property
    def is_separable_cosine(self) -> bool:
        return self.kind == "cosine"

    def scaled(self, factor: float) -> SourceSpec:
        if self.kind == "smooth":
            assert self.function is not None
            terms = tuple(replace(t, coef=t.coef * factor) for t in self.function.terms)
            return replace(self, function=replace(self.function, terms=terms))
        return replace(self, value=self.value * factor)

    def __call__(self, x: ArrayLike, y: ArrayLike, z: ArrayLike) -> FloatArray:
        x, y, z = (np.asarray(c, dtype=float) for c in (x, y, z))
        shape = np.broadcast_shapes(x.shape, y.shape, z.shape)
        if self.kind == "constant":
            return np.full(shape, self.value)
        if self.kind == "cosine":
            return self.value * np.cos(math.pi * x) * np.cos(math.pi * y) * np.cos(math.pi * z)
        assert self.function is not None
        return self.function(x, y, z)

    def __str__(self) -> str:
        if self.kind == "smooth":
            return f"smooth:{self.function}"
        return f"{self.kind}:{self.value!r}"
