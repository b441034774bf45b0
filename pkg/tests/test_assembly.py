import numpy as np
import pytest
import scipy.sparse.linalg as spla

from conftest import fit_coefficients
from curvem.assembly import Options, assemble, build_local_spaces, column_keys, enumerate_dofs
from curvem.cases import LOW_DEGREE_TERMS
from curvem.geometry import CellRole
from curvem.meshgen import generate_bubble_mesh, generate_bulged_cube_mesh, generate_disk_interface_mesh
from curvem.problems import ProblemSpec, disk_problem, polynomial_problem


def zero_problem(dim):
    zero = lambda X, *rest: np.zeros(len(X))  # noqa: E731
    return ProblemSpec("zero", {1: 1.0, 2: 3.0}, zero, zero, zero)


def poly_2d(degree):
    terms = {(0, 0): 0.3, (1, 0): 1.0, (0, 1): -0.5}
    if degree >= 2:
        terms.update({(2, 0): 0.7, (1, 1): -1.1, (0, 2): 0.4})
    return polynomial_problem(terms, 2)


def poly_3d(degree):
    terms = {}
    for d in range(1, degree + 1):
        terms.update(LOW_DEGREE_TERMS[d])
    return polynomial_problem(terms, 3)


def interpolant(system, func):
    """Global dof vector of a polynomial: every cell sets its own dofs from its dof matrix."""
    x = np.zeros(system.table.size)
    for grp in system.spaces.groups:
        space = grp.space
        for cid, shift, cols in zip(grp.cells, grp.shifts, grp.columns):
            c = fit_coefficients(space.basis, lambda X: func(X + shift, 1))
            x[cols[:space.n_own]] = space.D[:space.n_own] @ c
    return x


def single_region(mesh):
    for c in mesh.cells:
        c.region = 1
    return mesh


@pytest.mark.parametrize("mesh,k", [(generate_disk_interface_mesh(1, 8), 2),
                                    (generate_bubble_mesh(2, 1), 2),
                                    (generate_bulged_cube_mesh(2), 1)])
def test_matrix_is_symmetric_positive_definite(mesh, k):
    problem = disk_problem() if mesh.dim == 2 else poly_3d(1)
    A = assemble(mesh, Options(k), problem).matrix
    assert abs(A - A.T).max() <= 1e-13 * abs(A).max()
    lam = spla.eigsh(A.tocsc(), k=1, sigma=0, which="LM", return_eigenvectors=False)
    assert lam.min() > 0


def test_zero_data_gives_zero_right_hand_side():
    mesh = generate_disk_interface_mesh(1, 8)
    system = assemble(mesh, Options(2), zero_problem(2))
    assert np.all(system.rhs == 0) and np.all(system.lifting == 0)


@pytest.mark.parametrize("mesh,k,problem", [
    (single_region(generate_disk_interface_mesh(1, 8, perturbation=0.1, seed=1)), 1, poly_2d(1)),
    (single_region(generate_disk_interface_mesh(1, 8, perturbation=0.1, seed=1)), 2, poly_2d(2)),
    (generate_bubble_mesh(1, 1), 1, poly_3d(1)),
    (generate_bubble_mesh(1, 2), 2, poly_3d(2)),
    (generate_bulged_cube_mesh(2), 2, poly_3d(2)),
])
def test_polynomial_interpolant_solves_the_system(mesh, k, problem):
    """Plug-in residual: the dofs of a global polynomial of degree k satisfy the discrete equations."""
    system = assemble(mesh, Options(k), problem)
    x = interpolant(system, problem.exact)
    nf = system.table.n_free
    assert np.allclose(x[nf:], system.lifting, atol=1e-12)
    res = system.matrix @ x[:nf] - system.rhs
    assert np.linalg.norm(res) <= 1e-10 * max(np.linalg.norm(system.rhs), 1.0)


def test_constant_dirichlet_data_gives_constant_solution():
    mesh = generate_bubble_mesh(2, 1)
    problem = polynomial_problem({(0, 0, 0): 2.5}, 3)
    system = assemble(mesh, Options(1), problem)
    u = spla.spsolve(system.matrix.tocsc(), system.rhs)
    assert np.allclose(u, 2.5, atol=1e-12)


def test_translation_cache_does_not_change_the_system():
    mesh = generate_bubble_mesh(3, 2)
    problem = poly_3d(1)
    a = assemble(mesh, Options(1, cache=True), problem)
    b = assemble(mesh, Options(1, cache=False), problem)
    assert len(a.spaces.groups) < len(b.spaces.groups) == len(mesh.cells)
    assert abs(a.matrix - b.matrix).max() <= 1e-12 * abs(b.matrix).max()
    assert np.allclose(a.rhs, b.rhs, atol=1e-12 * np.abs(b.rhs).max())


def test_dof_table_orders_free_before_dirichlet():
    mesh = generate_disk_interface_mesh(1, 8)
    table = enumerate_dofs(mesh, 3)
    assert table.size == len(set(table.keys))
    dirichlet = [key for key in table.keys[table.n_free:]]
    assert all(kind in ("vertex", "edge") for kind, _, _ in dirichlet)
    # vertices + 2 nodes per straight edge + 3 moments per cell
    n_straight = sum(not e.curved for e in mesh.edges)
    assert table.size == len(mesh.vertices) + 2 * n_straight + 3 * len(mesh.cells)


def test_slave_columns_include_master_dofs():
    mesh = generate_disk_interface_mesh(1, 8)
    slave = next(c for c, cell in enumerate(mesh.cells) if cell.role == CellRole.SLAVE)
    keys = column_keys(mesh, slave, 2)
    assert len(keys) == len(set(keys))
    assert any(kind == "cell" and owner != slave for kind, owner, _ in keys)


def test_local_spaces_build_masters_first():
    mesh = generate_bubble_mesh(1, 1)
    spaces = build_local_spaces(mesh, Options(2))
    assert len(spaces.diameters) == 2
    roles = {g.space.role for g in spaces.groups}
    assert roles == {CellRole.MASTER, CellRole.SLAVE}


def test_k1_free_dofs_are_interior_and_neumann_vertices():
    mesh = generate_disk_interface_mesh(2, 8)
    r = np.linalg.norm(mesh.vertices, axis=1)
    on_outer = np.isclose(r, 2.0)
    # vertices at y = 0 close Dirichlet edges and are therefore fixed
    expected = np.sum(~on_outer) + np.sum(on_outer & (mesh.vertices[:, 1] < -1e-12))
    assert enumerate_dofs(mesh, 1).n_free == expected
