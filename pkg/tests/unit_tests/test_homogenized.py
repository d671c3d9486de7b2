import math
from fractions import Fraction

import pytest

from honeycomb.functions import SmoothTestFunction, SourceSpec
from honeycomb.geometry import LatticeParams, Mode, lattice_from_law
from honeycomb.homogenized import (
    analytic_solution,
    cell_bounds,
    compare_modes,
    cosine_amplitude,
    effective_tensor,
    lattice_tensor,
    solve_homogenized,
    unit_gradient_energies,
    validate_fractions,
)
from honeycomb.mesh import MeshConfig, build_grid, uniform_grid
from honeycomb.pde import conductivity_field, l2_error

THIRD = Fraction(1, 3)
HALF = Fraction(1, 2)


def test_reticulated_tensor_is_exact() -> None:
    tensor = effective_tensor(1, 1, (THIRD, THIRD, THIRD), Mode.RETICULATED)
    assert tensor.A == (Fraction(11, 9),) * 3
    assert tensor.is_isotropic
    assert tensor.trace == pytest.approx(11 / 3)


def test_gridwork_tensor() -> None:
    tensor = effective_tensor(1, 2, (HALF, HALF, 0), "gridwork")
    assert tensor.A == (Fraction(3, 2), Fraction(3, 2), 2)
    assert not tensor.is_isotropic
    floats = effective_tensor(1.0, 2.0, (0.5, 0.5, 0.0), "gridwork")
    assert floats.diagonal == pytest.approx((1.5, 1.5, 2.0))


def test_no_layer_conductivity_leaves_ambient() -> None:
    tensor = effective_tensor(2.0, 0.0, (0.2, 0.3, 0.5), "reticulated")
    assert tensor.diagonal == (2.0, 2.0, 2.0)


def test_tensor_rules() -> None:
    m = (THIRD, THIRD, THIRD)
    assert effective_tensor(1, 1, m, "reticulated", rule="laminate").A == (Fraction(5, 3),) * 3
    assert effective_tensor(1, 1, m, "reticulated", rule="uniform").A == (1, 1, 1)


@pytest.mark.parametrize(
    ("m", "mode", "match"),
    [
        ((0.5, 0.6, -0.1), "reticulated", "non-negative"),
        ((0.5, 0.4, 0.0), "reticulated", "sum to 1"),
        ((0.5, 0.25, 0.25), "gridwork", r"m\[2\] == 0"),
        ((0.5, 0.5), "reticulated", "three fractions"),
    ],
)
def test_invalid_fractions(m: tuple, mode: str, match: str) -> None:
    with pytest.raises(ValueError, match=match):
        validate_fractions(m, mode)


def test_negative_conductivity_rejected() -> None:
    with pytest.raises(ValueError, match="a > 0"):
        effective_tensor(0.0, 1.0, (THIRD,) * 3, "reticulated")


def test_csv_row() -> None:
    row = effective_tensor(1, 2, (HALF, HALF, 0), "gridwork").csv_row()
    assert row == ("gridwork", 1.0, 2.0, 0.5, 0.5, 0.0, 1.5, 1.5, 2.0)


def test_compare_modes() -> None:
    tensors = compare_modes(1, 1)
    assert tensors[Mode.RETICULATED].A == (Fraction(11, 9),) * 3
    assert tensors[Mode.GRIDWORK].A == (Fraction(5, 4), Fraction(5, 4), Fraction(3, 2))


def test_lattice_tensor_uses_limit_fractions() -> None:
    lat = lattice_from_law(1, (1, 1, 1), 2, "reticulated")
    assert lattice_tensor(lat, 1, 1).A == (Fraction(11, 9),) * 3
    finite = lattice_tensor(lat, 1, 1, finite=True)
    # finite-eps fractions |T^i| / |T| overlap and do not sum to one
    assert sum(finite.m) > 1
    assert finite.diagonal[0] < 11 / 9


def test_analytic_solution_for_cosine_source() -> None:
    tensor = effective_tensor(1, 1, (THIRD,) * 3, "reticulated")
    amplitude = cosine_amplitude(tensor)
    assert amplitude == pytest.approx(11 / 3 * math.pi**2)
    u = analytic_solution(tensor, SourceSpec.cosine(amplitude))
    assert u(0.0, 0.0, 0.0) == pytest.approx(1.0)
    assert u(0.5, 0.1, 0.2) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError, match="separable cosine"):
        analytic_solution(tensor, SourceSpec.constant(1.0))


def test_discrete_homogenized_solution_matches_closed_form() -> None:
    tensor = effective_tensor(1, 2, (HALF, HALF, 0), "gridwork")
    f = SourceSpec.cosine(cosine_amplitude(tensor))
    grid = uniform_grid(16)
    u, stats = solve_homogenized(tensor, f, grid)
    assert stats.converged
    assert l2_error(u, analytic_solution(tensor, f)) < 1e-2


def test_smooth_source_is_accepted(lattice: LatticeParams) -> None:
    tensor = lattice_tensor(lattice, 1.0, 1.0)
    f = SourceSpec.smooth(SmoothTestFunction.named("mixed"))
    u, _ = solve_homogenized(tensor, f, uniform_grid(8))
    assert u.dirichlet
    assert abs(u.values).max() > 0


def test_unit_gradient_energies_recover_diagonal() -> None:
    energies = unit_gradient_energies(uniform_grid(4), axis_scale=(2.0, 3.0, 4.0))
    assert energies == pytest.approx((2.0, 3.0, 4.0), rel=1e-8)


def test_unequal_fractions_give_distinct_layered_energies() -> None:
    lat = lattice_from_law(1, (0.5, 0.3, 0.2), 2, "reticulated")
    grid = build_grid(lat, MeshConfig(h_ambient=0.1))
    energies = unit_gradient_energies(grid, conductivity_field(lat, 1.0, 1.0, grid))
    tensor = lattice_tensor(lat, 1.0, 1.0)
    assert not tensor.is_isotropic
    for i, j in ((0, 1), (0, 2), (1, 2)):
        assert abs(energies[i] - energies[j]) > 1e-6 * max(energies)
    # the thickest family lies across axis 0, so axis 0 gains least from the layers
    assert energies[0] == min(energies)


def test_cell_bounds_bracket_finite_lattice() -> None:
    lat = lattice_from_law(2, (1, 1, 1), 2, "reticulated")
    for lower, upper in cell_bounds(lat, 1.0, 1.0):
        assert lower == pytest.approx(1.2104, abs=5e-4)
        assert upper == pytest.approx(1.2140, abs=5e-4)
    # at n = 3 the fine-scale cell is already stiffer than the effective tensor
    coarse = lattice_from_law(3, (1, 1, 1), 2, "reticulated")
    assert all(lower > 11 / 9 for lower, _ in cell_bounds(coarse, 1.0, 1.0))


def test_cell_bounds_approach_laminate_tensor() -> None:
    lat = lattice_from_law(50, (1, 1, 1), 2, "reticulated")
    laminate = lattice_tensor(lat, 1.0, 1.0, rule="laminate").diagonal
    for (lower, upper), A in zip(cell_bounds(lat, 1.0, 1.0), laminate):
        assert lower <= upper
        assert lower == pytest.approx(A, rel=0.02)
        assert upper == pytest.approx(A, rel=0.02)


def test_cell_bounds_gridwork_along_layers_is_exact() -> None:
    lat = lattice_from_law(2, (1, 1, 0), 2, "gridwork")
    (lower0, upper0), _, (lower2, upper2) = cell_bounds(lat, 1.0, 1.0)
    assert lower2 == pytest.approx(upper2, rel=1e-12)
    assert lower0 < upper0 < lower2
