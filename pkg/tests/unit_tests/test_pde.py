import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import sparse

from honeycomb.fields import ScalarField
from honeycomb.functions import SourceSpec
from honeycomb.geometry import LatticeParams, Region
from honeycomb.homogenized import analytic_solution, effective_tensor
from honeycomb.mesh import GridSpec, build_grid, uniform_grid
from honeycomb.pde import (
    ConvergenceError,
    analytic_h1_seminorm,
    analytic_l2_norm,
    assemble,
    conductivity_field,
    conjugate_gradient,
    directional_energies,
    h1_error,
    l2_error,
    l2_norm,
    solve_cg,
    uniform_conductivity,
)


def test_layer_cells_carry_scaled_conductivity(lattice: LatticeParams) -> None:
    grid = build_grid(lattice)
    sigma = conductivity_field(lattice, 1.0, 1.0, grid)
    assert sigma.layer_value == pytest.approx(1 / 0.169416, rel=1e-12)
    assert sigma.layer_value == pytest.approx(5.9026, abs=1e-4)
    inside = grid.cell_mask(Region.union(), lattice)
    assert np.all(sigma.values[inside] == sigma.layer_value)
    assert np.all(sigma.values[~inside] == 1.0)
    assert sigma.mass() == pytest.approx(1.0 - 0.169416 + 1.0, rel=1e-12)
    assert sigma.contrast == pytest.approx(5.9026, abs=1e-4)


@pytest.mark.parametrize(("a", "b"), [(1.0, 0.0), (0.0, 1.0), (-1.0, 1.0)])
def test_conductivities_must_be_positive(lattice: LatticeParams, a: float, b: float) -> None:
    grid = build_grid(lattice)
    with pytest.raises(ValueError, match="positive"):
        conductivity_field(lattice, a, b, grid)


def test_matrix_is_exactly_symmetric(aligned_grid: GridSpec, lattice: LatticeParams) -> None:
    sigma = conductivity_field(lattice, 1.0, 1.0, aligned_grid)
    system = assemble(aligned_grid, sigma, SourceSpec.constant(1.0))
    A = system.matrix
    assert A.shape == (aligned_grid.dofs, aligned_grid.dofs)
    assert (A != A.T).nnz == 0
    assert np.all(A.diagonal() > 0)


def test_neumann_rows_sum_to_zero(aligned_grid: GridSpec, lattice: LatticeParams) -> None:
    sigma = conductivity_field(lattice, 1.0, 1.0, aligned_grid)
    A = assemble(aligned_grid, sigma, dirichlet=False).matrix
    assert A.shape == (aligned_grid.n_nodes, aligned_grid.n_nodes)
    row_sums = np.asarray(A.sum(axis=1)).ravel()
    assert np.abs(row_sums).max() <= 1e-12 * np.abs(A.diagonal()).max()


def test_cg_matches_dense_solve() -> None:
    rng = np.random.default_rng(0)
    B = rng.standard_normal((5, 5))
    M = B @ B.T + 5 * np.eye(5)
    rhs = rng.standard_normal(5)
    x, stats = conjugate_gradient(sparse.csr_matrix(M), rhs, rel_tol=1e-14)
    assert stats.converged
    assert stats.iterations <= 10
    assert np.allclose(x, np.linalg.solve(M, rhs), rtol=0, atol=1e-9)


def test_cg_zero_rhs() -> None:
    x, stats = conjugate_gradient(sparse.identity(4, format="csr"), np.zeros(4))
    assert np.array_equal(x, np.zeros(4))
    assert stats.iterations == 0
    assert stats.converged


def test_cg_reports_non_convergence() -> None:
    grid = uniform_grid(8)
    system = assemble(grid, uniform_conductivity(grid), SourceSpec.constant(1.0))
    with pytest.raises(ConvergenceError, match="did not reach") as info:
        solve_cg(system, rel_tol=1e-12, max_iter=2)
    assert info.value.stats.iterations == 2
    assert not info.value.stats.converged
    assert isinstance(info.value, RuntimeError)


def test_cg_rejects_bad_diagonal() -> None:
    M = sparse.csr_matrix(np.array([[1.0, 0.0], [0.0, -1.0]]))
    with pytest.raises(ValueError, match="positive diagonal"):
        conjugate_gradient(M, np.ones(2))


def test_cg_detects_indefinite_matrix() -> None:
    M = sparse.csr_matrix(np.array([[1.0, 3.0], [3.0, 1.0]]))
    with pytest.raises(ConvergenceError, match="positive definite"):
        conjugate_gradient(M, np.array([1.0, -1.0]))


def test_manufactured_solution_converges_at_second_order() -> None:
    tensor = effective_tensor(1, 0, (Fraction(1, 3),) * 3, "reticulated")
    f = SourceSpec.cosine(3 * math.pi**2)
    exact = analytic_solution(tensor, f)
    assert exact.amplitude == pytest.approx(1.0)
    errors = []
    for cells in (10, 20):
        grid = uniform_grid(cells)
        u, stats = solve_cg(assemble(grid, uniform_conductivity(grid), f))
        assert stats.converged
        assert u.dirichlet
        errors.append(l2_error(u, exact) / analytic_l2_norm(grid, exact))
        assert h1_error(u, exact) / analytic_h1_seminorm(grid, exact) < 0.2
    rate = math.log2(errors[0] / errors[1])
    assert rate == pytest.approx(2.0, abs=0.2)


def test_linear_boundary_data_is_reproduced(lattice: LatticeParams) -> None:
    grid = build_grid(lattice)
    sigma = uniform_conductivity(grid, 2.0)
    system = assemble(grid, sigma, boundary=lambda x, y, z: np.broadcast_arrays(x, y, z)[0])
    u, _ = solve_cg(system, rel_tol=1e-12)
    x0 = ScalarField.from_function(grid, lambda x, y, z: np.broadcast_arrays(x, y, z)[0])
    assert not u.dirichlet
    assert np.allclose(u.values, x0.values, atol=1e-7)
    assert directional_energies(u, sigma) == pytest.approx((2.0, 0.0, 0.0), abs=1e-6)


def test_l2_norm_of_coordinate() -> None:
    grid = uniform_grid(6)
    x0 = ScalarField.from_function(grid, lambda x, y, z: np.broadcast_arrays(x, y, z)[0])
    assert l2_norm(x0) ** 2 == pytest.approx(1 / 12, rel=1e-12)
    with pytest.raises(ValueError, match="given grid"):
        l2_norm(x0, uniform_grid(4))


def test_assemble_rejects_foreign_conductivity(lattice: LatticeParams) -> None:
    grid = build_grid(lattice)
    with pytest.raises(ValueError, match="different grid"):
        assemble(grid, uniform_conductivity(uniform_grid(4)))


def test_solution_scales_with_source(aligned_grid: GridSpec, lattice: LatticeParams) -> None:
    sigma = conductivity_field(lattice, 1.0, 1.0, aligned_grid)
    u1, _ = solve_cg(assemble(aligned_grid, sigma, SourceSpec.cosine(1.0)))
    u2, _ = solve_cg(assemble(aligned_grid, sigma, SourceSpec.cosine(2.0)))
    assert np.allclose(u2.values, 2.0 * u1.values, rtol=1e-9, atol=1e-14)


def test_energy_identity_of_discrete_solution(aligned_grid: GridSpec, lattice: LatticeParams) -> None:
    sigma = conductivity_field(lattice, 1.0, 2.0, aligned_grid)
    system = assemble(aligned_grid, sigma, SourceSpec.constant(1.0))
    u, stats = solve_cg(system)
    assert stats.converged
    x = u.values.reshape(-1)[system.free]
    energy = float(x @ (system.matrix @ x))
    assert energy == pytest.approx(float(x @ system.rhs), rel=1e-8)
    assert u.energy(weights=sigma.values) == pytest.approx(energy, rel=1e-10)
