import os
from fractions import Fraction

import pytest

from honeycomb.geometry import LatticeParams, Mode, control_width, make_lattice
from honeycomb.mesh import GridSpec, MeshConfig, build_grid


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep HONEYCOMB_* variables of the calling shell out of the tests."""
    for key in list(os.environ):
        if key.startswith("HONEYCOMB_"):
            monkeypatch.delenv(key, raising=False)


@pytest.fixture
def lattice() -> LatticeParams:
    """eps = 1/3 with r = 0.01 on every axis."""
    R = control_width(0.01, Fraction(1, 3))
    return make_lattice(1, (0.01, 0.01, 0.01), (R, R, R), Mode.RETICULATED)


@pytest.fixture
def gridwork_lattice() -> LatticeParams:
    """eps = 1/5 with r = 0.004 on axes 0 and 1."""
    R = control_width(0.004, Fraction(1, 5))
    return make_lattice(2, (0.004, 0.004, 0), (R, R, 0), Mode.GRIDWORK)


@pytest.fixture
def aligned_config() -> MeshConfig:
    return MeshConfig(h_ambient=0.1, include_control=True)


@pytest.fixture
def aligned_grid(lattice: LatticeParams, aligned_config: MeshConfig) -> GridSpec:
    return build_grid(lattice, aligned_config)
