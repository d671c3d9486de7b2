"""Record models shared by the solvers, the verifiers and the run ledger."""

import math
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class InequalityReport(BaseModel):
    """One measured inequality ``lhs <= tol_factor * rhs``.

    Strict checks (``kind="lt"``) need ``lhs < tol_factor * rhs``. Equality
    checks (``kind="eq"``) pass when ``lhs`` and ``rhs`` agree to ``rel_tol``.
    """

    name: str
    lhs: float
    rhs: float
    kind: Literal["le", "lt", "eq"] = "le"
    tol_factor: float = 1.0
    rel_tol: float = 1e-10

    @property
    def slack(self) -> float:
        """``rhs / lhs``; infinite when the left-hand side vanishes."""
        if self.lhs == 0:
            return math.inf
        return self.rhs / self.lhs

    @property
    def passed(self) -> bool:
        if self.kind == "eq":
            scale = max(abs(self.lhs), abs(self.rhs))
            return abs(self.lhs - self.rhs) <= self.rel_tol * scale
        if self.kind == "lt":
            return self.lhs < self.tol_factor * self.rhs
        return self.lhs <= self.tol_factor * self.rhs


class SolveStats(BaseModel):
    """Outcome of a conjugate gradient run."""

    dofs: int
    iterations: int
    final_residual: float = Field(description="Relative residual ||b - Ax|| / ||b||.")
    converged: bool


class EnergyTerm(BaseModel):
    """A named term of the tested energy balance and, when known, its limit."""

    name: str
    value: float
    limit: Optional[float] = None

    @property
    def defect(self) -> Optional[float]:
        if self.limit is None:
            return None
        return abs(self.value - self.limit)


class ConvergenceRecord(BaseModel):
    """One point of an eps sweep."""

    n: int
    eps: float
    dofs: int
    contrast: float
    iters: int
    l2_err: float = Field(ge=0)
    h1_err: float = Field(ge=0)
    grad_v_norm: float = Field(
        ge=0, description="Gradient of the oscillating part of the test field over the control zone."
    )
    intersection_diag: float = Field(ge=0, description="Layer term over the pairwise intersections.")
    seconds: float = 0.0
    terms: list[EnergyTerm] = Field(default_factory=list)
    slice_deviation: list[float] = Field(
        default_factory=list, description="|G^i(u) - u| per active axis."
    )
    directional_energy: list[float] = Field(default_factory=list)


class RunManifest(BaseModel):
    """Contents of ``run.json`` for one command invocation."""

    manifest_version: int = 1
    command: str = ""
    status: Literal["running", "completed", "aborted", "failed"] = "running"
    config: dict[str, Any] = Field(default_factory=dict)
    files: list[Path] = Field(default_factory=list)
    records: list[dict[str, Any]] = Field(default_factory=list)
    checks_failed: int = 0
    message: str = ""
