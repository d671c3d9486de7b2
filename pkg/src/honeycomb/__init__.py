"""Honeycomb homogenization.

Thin-layer periodic structures in the unit cube: exact measures, a layered
Q1 diffusion solver, the homogenized limit and the averaging operators that
connect them.
"""

from honeycomb.context import ExperimentConfig, load_config
from honeycomb.geometry import LatticeParams, Mode, Region, make_lattice
from honeycomb.homogenized import EffectiveTensor, effective_tensor
from honeycomb.pde import ConvergenceError

__all__ = [
    "ConvergenceError",
    "EffectiveTensor",
    "ExperimentConfig",
    "LatticeParams",
    "Mode",
    "Region",
    "effective_tensor",
    "load_config",
    "make_lattice",
]
