"""Define the configurable parameters of an experiment run."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from honeycomb.functions import SmoothTestFunction, SourceSpec
from honeycomb.geometry import ControlRule, LatticeParams, Mode, lattice_from_law
from honeycomb.homogenized import EffectiveTensor, TensorRule, cosine_amplitude
from honeycomb.mesh import MeshConfig

ENV_PREFIX = "HONEYCOMB_"

_LIST_FIELDS = ("n_values", "thickness_coeffs", "fractions", "battery")


class ExperimentConfig(BaseModel):
    """Parameters shared by every command."""

    model_config = ConfigDict(extra="forbid")

    mode: Mode = Field(default=Mode.RETICULATED, description="Layer families present.")
    n_values: list[int] = Field(
        default_factory=lambda: [1, 2, 3],
        description="Sweep points; the period is eps = 1/(2n+1).",
    )
    thickness_coeffs: tuple[float, float, float] = Field(
        default=(1.0, 1.0, 1.0),
        description="Coefficients c_i of the thickness law r_i = c_i eps^p.",
    )
    exponent: float = Field(default=2.0, description="Exponent p > 1 of the thickness law.")
    a: float = Field(default=1.0, gt=0, description="Ambient conductivity.")
    b: float = Field(default=1.0, ge=0, description="Total layer conductivity.")

    source: Literal["constant", "cosine", "smooth"] = "cosine"
    source_value: Optional[float] = Field(
        default=None,
        description="Constant value or cosine amplitude. For cosines the default "
        "makes the homogenized solution prod cos(pi x_i).",
    )
    source_function: str = Field(default="mixed", description="Test function used as a smooth source.")
    test_function: str = Field(default="cos", description="Test function phi of the energy diagnostics.")
    battery: list[str] = Field(
        default_factory=lambda: ["const", "x0", "x1", "x2", "cos", "mixed"],
        description="Test functions of the inequality suite.",
    )

    h_ambient: float = Field(default=0.05, gt=0)
    min_cells_per_layer: int = Field(default=2, ge=2)
    grading_slope: float = Field(default=0.5, gt=0, le=0.6)
    include_control: bool = True
    max_nodes_per_axis: int = Field(default=400, ge=3)
    max_dofs: int = Field(default=2_000_000, ge=1)

    rel_tol: float = Field(default=1e-10, gt=0, lt=1)
    max_iter: int = Field(default=20_000, ge=1)

    control_rule: ControlRule = Field(
        default="power",
        description="Control half-width rule; the default keeps R/eps decreasing over the sweep.",
    )
    control_theta: float = Field(default=2 / 3, gt=0, lt=1, description="Exponent or fraction of the control rule.")

    reference: TensorRule = Field(
        default="effective", description="Tensor used as the homogenized reference."
    )
    match_contrast: bool = Field(
        default=False,
        description="Set b = a |T_eps| at every sweep point (contrast 1 control run).",
    )
    fractions: Optional[tuple[float, float, float]] = Field(
        default=None, description="Fractions for `effective`; limit fractions by default."
    )

    samples: int = Field(default=1_000_000, ge=10_000)
    seed: int = 12345
    mc_chunk: int = Field(default=1 << 16, ge=1)
    workers: int = Field(default=1, ge=1)

    trace_constant: float = Field(default=1.0, gt=0)
    tol_factor: float = Field(default=1.1, ge=1)
    unit_energies: bool = Field(
        default=False, description="Also solve the three unit-gradient problems per sweep point."
    )

    output_dir: Path = Path("results")
    record_timing: bool = Field(
        default=False, description="Write wall times; off keeps outputs byte-identical."
    )

    def __init__(self, **data: Any) -> None:
        """Initialize the config, fetching environment variables for fields not passed as args."""
        for name in self.__class__.model_fields:
            if name not in data:
                env_val = os.environ.get(ENV_PREFIX + name.upper())
                if env_val is not None:
                    data[name] = env_val
        super().__init__(**data)

    @field_validator(*_LIST_FIELDS, mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("n_values")
    @classmethod
    def _check_sweep(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("n_values must not be empty")
        if any(n < 1 for n in value):
            raise ValueError(f"n_values must be positive, got {value}")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError(f"n_values must be strictly increasing, got {value}")
        return value

    @field_validator("exponent")
    @classmethod
    def _check_exponent(cls, value: float) -> float:
        if not value > 1:
            raise ValueError(f"the thickness exponent must exceed 1, got {value}")
        return value

    @model_validator(mode="after")
    def _check_mode(self) -> ExperimentConfig:
        c = self.thickness_coeffs
        if any(x < 0 for x in c):
            raise ValueError(f"thickness coefficients must be non-negative, got {c}")
        active = (0, 1, 2) if self.mode is Mode.RETICULATED else (0, 1)
        if any(c[i] <= 0 for i in active):
            raise ValueError(f"{self.mode.value} mode needs positive coefficients on axes {active}, got {c}")
        if self.mode is Mode.GRIDWORK and c[2] != 0:
            raise ValueError(f"gridwork mode needs thickness_coeffs[2] == 0, got {c[2]}")
        for label in [*self.battery, self.test_function, self.source_function]:
            SmoothTestFunction.named(label)
        return self

    def lattice(self, n: int) -> LatticeParams:
        return lattice_from_law(
            n,
            self.thickness_coeffs,
            self.exponent,
            self.mode,
            rule=self.control_rule,
            theta=self.control_theta,
        )

    def mesh_config(self, *, include_control: Optional[bool] = None) -> MeshConfig:
        return MeshConfig(
            h_ambient=self.h_ambient,
            min_cells_per_layer=self.min_cells_per_layer,
            grading_slope=self.grading_slope,
            include_control=self.include_control if include_control is None else include_control,
            max_nodes_per_axis=self.max_nodes_per_axis,
            max_dofs=self.max_dofs,
        )

    def source_spec(self, tensor: EffectiveTensor) -> SourceSpec:
        if self.source == "smooth":
            return SourceSpec.smooth(SmoothTestFunction.named(self.source_function))
        if self.source == "constant":
            return SourceSpec.constant(1.0 if self.source_value is None else self.source_value)
        if self.source_value is None:
            return SourceSpec.cosine(cosine_amplitude(tensor))
        return SourceSpec.cosine(self.source_value)

    def phi(self) -> SmoothTestFunction:
        return SmoothTestFunction.named(self.test_function)

    def snapshot(self) -> dict[str, Any]:
        return self.model_dump(mode="json")


def load_config(path: Optional[Path] = None, **overrides: Any) -> ExperimentConfig:
    """Read a flat ``key = value`` file (``#`` comments, comma-separated lists).

    Keyword overrides win over the file; fields set nowhere fall back to
    ``HONEYCOMB_<FIELD>`` environment variables and then to the defaults.

    Raises:
        FileNotFoundError: If ``path`` does not exist.
        ValueError: On unknown keys, keys without a value or invalid values.
    """
    data: dict[str, Any] = {}
    if path is not None:
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        for key, value in dotenv_values(path).items():
            if value is None:
                raise ValueError(f"config key {key!r} in {path} has no value")
            data[key.strip().lower()] = value
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**data)
