import math

import numpy as np
import pytest

from conftest import (GlobalPolynomial, column_values, consistency_gap, projector_errors, random_bubble_mesh,
                      random_bulged_cell)
from curvem.geometry import Cell, CellRole, Curve, Edge, Face, Mesh, SurfacePatch, master_of
from curvem.local3d import (FaceSpaceCache, build_local_space_3d, face_space, local_dofs_3d, pstar_rows,
                            sigma_moments)
from curvem.meshgen import generate_bubble_mesh, generate_bulged_cube_mesh
from curvem.polybasis import basis_dimension
from curvem.quadrature import patch_rule


def cell_poly(mesh, cid, k, rng):
    P = mesh.vertices[mesh.cell_vertices(cid)]
    return GlobalPolynomial(3, k, rng, origin=P.mean(axis=0), scale=np.ptp(P, axis=0).max())


def master_and_slave(mesh, k, **kw):
    faces = FaceSpaceCache(mesh, k, None)
    slave = next(c for c, cell in enumerate(mesh.cells) if cell.role == CellRole.SLAVE)
    m, _ = master_of(mesh, slave)
    master = build_local_space_3d(mesh, m, k, faces=faces)
    return master, build_local_space_3d(mesh, slave, k, faces=faces, master=master, **kw)


def octant_topology():
    """Tetrahedron with three curved edges bounding one curved face (topology only, for dof counting)."""
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float)
    arc = Curve("circular_arc", {"center": [0, 0, 0], "radius": 1.0}, 0.0, math.pi / 2)
    edges = [Edge((0, 1)), Edge((0, 2)), Edge((0, 3)), Edge((1, 2), arc), Edge((2, 3), arc), Edge((3, 1), arc)]
    patch = SurfacePatch("bubble_triangle", {"a": V[1], "b": V[2], "c": V[3], "amplitude": 0.0, "normal": [1, 1, 1]})
    faces = [Face([(0, 1), (3, 1), (1, -1)]), Face([(1, 1), (4, 1), (2, -1)]), Face([(2, 1), (5, 1), (0, -1)]),
             Face([(3, 1), (4, 1), (5, 1)], patch)]
    return Mesh(3, V, edges, faces, [Cell([(0, -1), (1, -1), (2, -1), (3, 1)], role=CellRole.MASTER)])


def test_tetrahedron_like_conditions_match_cubic_dimension():
    mesh = octant_topology()
    dofs = local_dofs_3d(mesh, 0, 3)
    # 4 vertices, 3 straight edges with 2 nodes, 3 flat faces with 3 moments, 4 cell moments
    assert len(dofs) == 4 + 3 * 2 + 3 * 3 + 4
    assert len(pstar_rows(dofs, 3)) == 4 + 3 * 2 + 3 * 3 + 1 == basis_dimension(3, 3) == 20


@pytest.mark.parametrize("k", [1, 2, 3])
def test_dof_count_formula(k):
    mesh = generate_bubble_mesh(1, 1)
    for cid in range(2):
        n_v = len(mesh.cell_vertices(cid))
        n_e = len(mesh.cell_edges(cid))
        n_f = sum(not mesh.faces[f].curved for f, _ in mesh.cells[cid].boundary)
        expected = n_v + (k - 1) * n_e + basis_dimension(k - 2, 2) * n_f + basis_dimension(k - 2, 3)
        assert len(local_dofs_3d(mesh, cid, k)) == expected


def test_square_face_space():
    mesh = generate_bulged_cube_mesh(1, amplitude=0.0)
    fs = face_space(mesh, 0, 2)
    assert len(fs.keys) == 9
    assert fs.measure == pytest.approx(1.0)
    assert np.abs(fs.to_plane(mesh.vertices[mesh.face_vertices(0)]).mean(axis=0)).max() < 1e-14


def sector_face(height=0.3):
    """Flat face at z = height: the 60 degree unit sector about the z axis, with a 3D arc edge."""
    a, b = math.pi / 3, 2 * math.pi / 3
    V = np.array([[math.cos(a), math.sin(a), height], [math.cos(b), math.sin(b), height], [0, 0, height]])
    arc = Curve("circular_arc", {"center": [0, 0, height], "radius": 1.0, "axes": [[1, 0, 0], [0, 1, 0]]}, a, b)
    return Mesh(3, V, [Edge((0, 1), arc), Edge((1, 2)), Edge((2, 0))], [Face([(0, 1), (1, 1), (2, 1)])], [])


@pytest.mark.parametrize("k", [1, 2, 3])
def test_flat_face_with_curved_edge(rng, k):
    fs = face_space(sector_face(), 0, k)
    assert fs.measure == pytest.approx(math.pi / 6, rel=1e-12)
    assert np.abs(fs.normal[:2]).max() < 1e-14
    # the face fits its own trace on the arc, so face projections reproduce plane polynomials
    q = GlobalPolynomial(2, k, rng)
    x = column_values(fs.space, q)
    B = fs.space.basis.evaluate(fs.points2d)
    exact = q(fs.points2d)
    for coeffs in (fs.space.pi_nabla(x), fs.space.pi0(x)):
        assert np.abs(B @ coeffs - exact).max() <= 1e-11 * np.abs(exact).max()


def test_face_moments_do_not_depend_on_the_plane_frame(rng):
    """A fixed 3D polynomial has the same face integrals in any in-plane frame."""
    mesh = generate_bubble_mesh(1, 1)
    fid = next(f for f in range(len(mesh.faces)) if not mesh.faces[f].curved)
    fs = face_space(mesh, fid, 3)
    q = GlobalPolynomial(3, 3, rng)
    ref = fs.weights @ q(fs.points)
    theta = rng.uniform(0, 2 * math.pi)
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    axes = R @ fs.axes
    pts = fs.origin + (fs.points2d @ R.T) @ axes
    assert fs.weights @ q(pts) == pytest.approx(ref, rel=1e-12)


def test_cell_moment_of_top_degree_gives_zero_pstar():
    k = 3
    mesh = generate_bubble_mesh(1, 1)
    master, _ = master_and_slave(mesh, k)
    n_low = basis_dimension(k - 3, 3)
    top = [i for i, d in enumerate(master.dofs[:master.n_own]) if d.kind == "cell" and d.index >= n_low]
    assert top
    x = np.zeros(master.n_own)
    x[top[0]] = 1.0
    assert np.abs(master.trace.matrix @ x).max() == 0.0


@pytest.mark.parametrize("k", [1, 2, 3])
def test_pstar_fits_polynomials_exactly(rng, k):
    mesh = random_bubble_mesh(rng)
    master, _ = master_and_slave(mesh, k)
    q = cell_poly(mesh, master.ident, k, rng)
    x = column_values(master, q)
    pts = next(pc.points for pc in master.pieces if pc.curved)
    vals = master.basis.evaluate(pts) @ (master.trace.matrix @ x[:master.n_own])
    assert np.abs(vals - q(pts)).max() <= 1e-10 * np.abs(q(pts)).max()


def test_projectors_reproduce_polynomials_on_bubble_cells():
    rng = np.random.default_rng(21)
    worst, count = 0.0, 0
    for i in range(12):
        k = 1 + i % 3
        mesh = random_bubble_mesh(rng)
        master, slave = master_and_slave(mesh, k)
        q = cell_poly(mesh, master.ident, k, rng)
        worst = max(worst, *projector_errors(master, q), *projector_errors(slave, q, master))
        count += 2
    assert count >= 20
    assert worst <= 1e-11


@pytest.mark.parametrize("top_tag,role", [("neumann", CellRole.NEUMANN_CURVED), ("dirichlet", CellRole.DIRICHLET_CURVED)])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_projectors_reproduce_polynomials_on_bulged_cells(rng, top_tag, role, k):
    mesh = random_bulged_cell(rng, top_tag)
    assert mesh.cells[0].role == role
    q = cell_poly(mesh, 0, k, rng)
    space = build_local_space_3d(mesh, 0, k, dirichlet=q)
    assert max(projector_errors(space, q)) <= 1e-11


def test_unit_cube_k1_hat_projection():
    """The trilinear hat of the origin has mean gradient -1/4 per axis and boundary integral 3/4 over area 6."""
    mesh = generate_bulged_cube_mesh(1, amplitude=0.0)
    space = build_local_space_3d(mesh, 0, 1)
    origin = mesh.cell_vertices(0).index(0)
    x = np.zeros(space.ncols)
    x[origin] = 1.0
    h = space.basis.diameter
    assert h == pytest.approx(math.sqrt(3))
    assert np.allclose(space.pi_nabla(x), [1 / 8, -h / 4, -h / 4, -h / 4], atol=1e-13)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_consistency_identity_3d(rng, k):
    kappa = rng.uniform(0.1, 10)
    mesh = random_bubble_mesh(rng)
    master, slave = master_and_slave(mesh, k)
    for space, m in ((master, None), (slave, master)):
        q = cell_poly(mesh, space.ident, k, rng)
        assert consistency_gap(space, rng.normal(size=space.ncols), q, kappa, m) <= 1e-12
    mesh = random_bulged_cell(rng, "neumann")
    space = build_local_space_3d(mesh, 0, k)
    assert consistency_gap(space, rng.normal(size=space.ncols), cell_poly(mesh, 0, k, rng), kappa) <= 1e-12


@pytest.mark.parametrize("k", [1, 2])
def test_stiffness_psd_and_stabilization_scaled_by_diameter(rng, k):
    mesh = random_bubble_mesh(rng)
    master, slave = master_and_slave(mesh, k)
    for space in (master, slave):
        K = space.stiffness(1.0)[0]
        assert np.allclose(K, K.T, atol=1e-14 * np.abs(K).max())
        assert np.linalg.eigvalsh(K).min() >= -1e-11 * np.abs(K).max()
        ones = column_values(space, lambda X: np.ones(len(X)), master if space is slave else None)
        assert np.abs(K @ ones).max() <= 1e-11 * np.abs(K).max()
    # the dof-identity term carries h_E: compare with an explicit rebuild
    D, P, mask = master.D, master.P, master.mask.astype(float)
    R = np.eye(master.ncols) - D @ P
    assert np.allclose(master.Ks, master.diameter * R.T @ (R * mask[:, None]), atol=1e-12 * np.abs(master.Ks).max())
    assert not slave.mask[slave.n_own:].any()
    _, twice = master_and_slave(mesh, k, stabilize_twice=True)
    assert twice.mask.all()


def test_stabilization_vanishes_on_polynomials(rng):
    mesh = random_bubble_mesh(rng)
    master, slave = master_and_slave(mesh, 2)
    q = cell_poly(mesh, master.ident, 2, rng)
    x = column_values(master, q)
    assert np.abs(master.Ks @ x).max() <= 1e-10 * np.abs(master.Ks).max() * np.abs(x).max()


def test_sigma_moments_area_signs_and_oracle(rng):
    mesh = random_bubble_mesh(rng)
    master, slave = master_and_slave(mesh, 2)
    ones_m = column_values(master, lambda X: np.ones(len(X)))
    plain, normal, flux = sigma_moments(master)
    patch = next(f.patch for f in mesh.faces if f.patch is not None)
    pts, w, _ = patch_rule(patch, 40)
    assert plain[0] @ ones_m == pytest.approx(w.sum(), rel=1e-10)

    q = cell_poly(mesh, master.ident, 2, rng)
    xm, xs = column_values(master, q), column_values(slave, q, master)
    pm, nm, fm = sigma_moments(master)
    ps, ns, fs = sigma_moments(slave)
    assert pm[0] @ xm == pytest.approx(ps[0] @ xs, rel=1e-12)
    assert nm[:, 0] @ xm == pytest.approx(-(ns[:, 0] @ xs), rel=1e-12, abs=1e-14)
    # flux of the first linear member scales with 1/h
    assert fm[1] @ xm * master.diameter == pytest.approx(-(fs[1] @ xs) * slave.diameter, rel=1e-12, abs=1e-14)
    # dense surface oracle for int_sigma q p_b
    oracle = (w * q(pts)) @ master.basis.evaluate(pts)
    assert np.abs(pm @ xm - oracle).max() <= 1e-10 * np.abs(oracle).max()


def test_curved_neumann_face_vector(rng):
    mesh = random_bulged_cell(rng, "neumann")
    k = 2
    space = build_local_space_3d(mesh, 0, k)
    q = cell_poly(mesh, 0, k, rng)
    g = lambda X, n: np.cos(X[:, 0]) + X[:, 2]  # noqa: E731
    lhs = space.neumann_vector(g) @ column_values(space, q)
    patch = next(f.patch for f in mesh.faces if f.patch is not None)
    pts, w, nrm = patch_rule(patch, 40)
    assert lhs == pytest.approx(np.sum(w * g(pts, nrm) * q(pts)), rel=1e-10)


def test_slave_needs_master():
    mesh = generate_bubble_mesh(1, 1)
    slave = next(c for c, cell in enumerate(mesh.cells) if cell.role == CellRole.SLAVE)
    with pytest.raises(ValueError):
        build_local_space_3d(mesh, slave, 1)
