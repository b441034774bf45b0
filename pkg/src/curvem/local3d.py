"""Local virtual element spaces on polyhedra with at most one curved face.

Flat faces are handled by a 2D local space in the face plane; integrals of
the virtual function against polynomials of degree <= k on a flat face use
its face L2 projection. On a curved face only moments are available: they are
those of the polynomial ``p*`` fitted by least squares to the master cell's
degrees of freedom (vertex and edge values, flat-face moments up to k-2 and
cell moments up to k-3).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import (CellRole, Mesh, NEUMANN, check_planar, face_frame, face_polygon_view,
                       polyhedron_view)
from .local2d import (BoundaryPiece, DofDescriptor, DofFunctionals, LocalSpace, TraceOperator,
                      build_local_space_2d, build_projectors, cell_geometry, load_operator, lsq_matrix,
                      stiffness_parts)
from .polybasis import basis_dimension
from .quadrature import cell_rule, cell_rule_general, curved_points_for, face_rule, gauss_lobatto, geometric_measures


@dataclass
class FaceSpace:
    """A flat face's local space in its plane frame."""

    face_id: int
    origin: np.ndarray
    axes: np.ndarray  # (2, 3)
    normal: np.ndarray
    space: LocalSpace
    points2d: np.ndarray  # face rule exact to degree 2k
    weights: np.ndarray

    @property
    def points(self) -> np.ndarray:
        return self.origin + self.points2d @ self.axes

    @property
    def keys(self) -> list:
        return self.space.keys

    @property
    def measure(self) -> float:
        return self.space.measure

    def to_plane(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x) - self.origin) @ self.axes.T

    def projection_values(self, pts2d: np.ndarray) -> np.ndarray:
        """Values of the face L2 projection at plane points, as rows over face columns."""
        return self.space.basis.evaluate(pts2d) @ self.space.Q


def face_space(mesh: Mesh, fid: int, k: int, n_curved: int | None = None) -> FaceSpace:
    """Local space of a flat face after an isometric map to its plane frame.

    The frame origin is the face centroid; its first axis follows the
    lowest-index edge.
    """
    face = mesh.faces[fid]
    if face.curved:
        raise ValueError(f"face {fid} is curved")
    check_planar(mesh, fid)
    axes, normal = face_frame(mesh, fid)
    origin = mesh.vertices[mesh.face_vertices(fid)].mean(axis=0)
    view = face_polygon_view(mesh, fid, origin, axes)
    _, c2, _ = geometric_measures(view, n_curved)
    origin = origin + c2 @ axes
    view = face_polygon_view(mesh, fid, origin, axes)
    space = build_local_space_2d(view, k, CellRole.PLAIN, n_curved=n_curved, projections_only=True,
                                 moment_kind="face")
    pts, w = cell_rule_general(view, 2 * k, n_curved, centre=np.zeros(2))
    return FaceSpace(fid, origin, axes, normal, space, pts, w)


def local_dofs_3d(mesh: Mesh, cid: int, k: int) -> list:
    """Vertices, Gauss-Lobatto values on straight edges, flat-face moments, cell moments."""
    dofs = [DofDescriptor("vertex", v) for v in mesh.cell_vertices(cid)]
    for e in mesh.cell_edges(cid):
        if not mesh.edges[e].curved:
            dofs.extend(DofDescriptor("edge", e, i) for i in range(k - 1))
    n2f = basis_dimension(k - 2, 2)
    for fid, _ in mesh.cells[cid].boundary:
        if not mesh.faces[fid].curved:
            dofs.extend(DofDescriptor("face", fid, j) for j in range(n2f))
    dofs.extend(DofDescriptor("cell", cid, j) for j in range(basis_dimension(k - 2, 3)))
    return dofs


def _gl_points(mesh: Mesh, eid: int, k: int) -> np.ndarray:
    a, b = mesh.vertices[list(mesh.edges[eid].v)]
    s = gauss_lobatto(k)[0][1:-1]
    return a + s[:, None] * (b - a)


def pstar3d_matrix(A: np.ndarray, rows: np.ndarray, n_own: int) -> np.ndarray:
    """Unconstrained least-squares fit of P_k to the selected dof rows."""
    T = np.zeros((A.shape[1], n_own))
    T[:, rows] = lsq_matrix(A[rows])
    return T


def pstar_rows(dofs: list, k: int) -> np.ndarray:
    """Rows entering ``p*``: everything except cell moments of degree k-2."""
    n3 = basis_dimension(max(k - 3, -1), 3)
    return np.array([i for i, d in enumerate(dofs) if d.kind != "cell" or d.index < n3], dtype=int)


class FaceSpaceCache(dict):
    def __init__(self, mesh: Mesh, k: int, n_curved: int | None):
        super().__init__()
        self.mesh, self.k, self.n_curved = mesh, k, n_curved

    def __missing__(self, fid):
        fs = face_space(self.mesh, fid, self.k, self.n_curved)
        self[fid] = fs
        return fs


def build_local_space_3d(mesh: Mesh, cid: int, k: int, role: CellRole | None = None, *,
                         n_curved: int | None = None, faces: FaceSpaceCache | None = None,
                         master: LocalSpace | None = None, dirichlet: Callable | None = None,
                         stabilize_twice: bool = False) -> LocalSpace:
    """Every local operator of a 3D cell (kappa = 1, stabilization scaled by h_E)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n_curved = n_curved or curved_points_for(k)
    role = mesh.cells[cid].role if role is None else role
    faces = FaceSpaceCache(mesh, k, n_curved) if faces is None else faces
    view = polyhedron_view(mesh, cid)
    geo = cell_geometry(view, k, n_curved)
    basis = geo.basis
    own = local_dofs_3d(mesh, cid, k)
    n_own = len(own)
    index = {d.key: i for i, d in enumerate(own)}
    n3 = basis_dimension(k - 2, 3)
    n2f = basis_dimension(k - 2, 2)
    moment_cols = np.arange(n_own - n3, n_own)

    # own dof functionals
    vids = mesh.cell_vertices(cid)
    pts = [mesh.vertices[vids]]
    for e in mesh.cell_edges(cid):
        if not mesh.edges[e].curved:
            pts.append(_gl_points(mesh, e, k))
    point_pts = np.concatenate(pts).reshape(-1, 3)
    functionals = DofFunctionals(point_rows=np.arange(len(point_pts)), points=point_pts, size=n_own)
    curved_faces = []
    for fv in view.faces:
        if fv.curved:
            curved_faces.append(fv)
            continue
        if n2f:
            fs = faces[fv.face_id]
            rows = np.array([index[("face", fv.face_id, j)] for j in range(n2f)])
            fb = fs.space.basis.with_degree(k - 2).evaluate(fs.points2d) / fs.measure
            functionals.face_rows.append((rows, fs.points, fs.weights, fb))
    lpts, lw = cell_rule(view, 2 * k + 2, n_curved, centre=geo.centroid)
    if n3:
        functionals.moment_rows = moment_cols.copy()
        functionals.moment_points = lpts
        functionals.moment_weights = lw
        functionals.moment_values = basis.with_degree(k - 2).evaluate(lpts) / geo.measure
    D_own = functionals.apply(basis)
    D_own[moment_cols] = geo.H[:n3] / geo.measure
    if len(curved_faces) > 1:
        raise ValueError(f"cell {cid} has more than one curved face")

    trace = None
    if curved_faces and role in (CellRole.MASTER, CellRole.NEUMANN_CURVED):
        rows = pstar_rows(own, k)
        trace = TraceOperator(pstar3d_matrix(D_own, rows, n_own), basis, "lsq3d")

    dofs = list(own)
    master_cols = None
    if role == CellRole.SLAVE:
        if master is None or master.trace is None:
            raise ValueError("slave cell needs its master's p* operator")
        master_cols = np.empty(master.n_own, dtype=int)
        for i, d in enumerate(master.dofs[:master.n_own]):
            if d.key in index:
                master_cols[i] = index[d.key]
            else:
                master_cols[i] = len(dofs)
                index[d.key] = len(dofs)
                dofs.append(d)
    ncols = len(dofs)

    pieces = []
    for fv in view.faces:
        if not fv.curved:
            fs = faces[fv.face_id]
            V = np.zeros((len(fs.weights), ncols))
            cols = [index[key] for key in fs.keys]
            V[:, cols] = fs.projection_values(fs.points2d)
            nrm = np.repeat(fv.outward_normal[None, :], len(fs.weights), axis=0)
            pieces.append(BoundaryPiece(fs.points, fs.weights, nrm, V))
            continue
        x, w, nrm = face_rule(fv, 2 * k, n_curved)
        V = np.zeros((len(w), ncols))
        v0 = None
        if trace is not None:
            V[:, :n_own] = basis.evaluate(x) @ trace.matrix
        elif role == CellRole.SLAVE:
            np.add.at(V.T, master_cols, (master.basis.evaluate(x) @ master.trace.matrix).T)
        elif role == CellRole.DIRICHLET_CURVED:
            if dirichlet is None:
                raise ValueError("curved Dirichlet face needs boundary data")
            v0 = np.asarray(dirichlet(x), dtype=float)
        else:
            raise ValueError(f"curved face on a {role.value} cell")
        pieces.append(BoundaryPiece(x, w, nrm, V, v0, curved=True))

    proj = build_projectors(basis, geo.H, geo.measure, pieces, moment_cols, ncols)

    D = np.zeros((ncols, len(basis)))
    D[:n_own] = D_own
    mask = np.zeros(ncols, dtype=bool)
    mask[:n_own] = True
    if master_cols is not None and stabilize_twice:
        mvals = master.functionals.apply(basis)
        for i, c in enumerate(master_cols):
            if c >= n_own:
                D[c] = mvals[i]
                mask[c] = True

    space = LocalSpace(cid, 3, k, role, geo.measure, geo.centroid, geo.diameter, basis, dofs, n_own,
                       geo.H, proj["P"], proj["p0"], proj["G"], proj["g0"], proj["Q"], proj["q0"], D, mask,
                       trace=trace, functionals=functionals, pieces=pieces)
    space.Kc, space.rc, space.Ks, space.rs = stiffness_parts(
        proj["G"], proj["g0"], geo.H, proj["P"], proj["p0"], D, mask.astype(float), geo.diameter)
    space.load_points = lpts
    space.load_weights = lw
    space.load_values = basis.with_degree(k - 1).evaluate(lpts)
    space.load_operator = load_operator(geo.H, proj["Q"], proj["q0"], k, 3)
    space.neumann_pieces = _neumann_pieces_3d(view, k, basis, trace, index, faces, n_own, ncols, n_curved)
    return space


def _neumann_pieces_3d(view, k, basis, trace, index, faces, n_own, ncols, n_curved):
    out = []
    for fv in view.faces:
        if fv.tag != NEUMANN:
            continue
        if fv.curved:
            # int_sigma Pi0_k g_N p* equals int_sigma g_N p* since p* lies in the projection space
            x, w, nrm = face_rule(fv, 2 * k + 2, n_curved)
            V = np.zeros((len(w), ncols))
            V[:, :n_own] = basis.evaluate(x) @ trace.matrix
        else:
            fs = faces[fv.face_id]
            V = np.zeros((len(fs.weights), ncols))
            V[:, [index[key] for key in fs.keys]] = fs.projection_values(fs.points2d)
            x, w = fs.points, fs.weights
            nrm = np.repeat(fv.outward_normal[None, :], len(w), axis=0)
        out.append(BoundaryPiece(x, w, nrm, V))
    return out


def sigma_moments(space: LocalSpace):
    """Curved-face moment operators of a cell: (int p* q, int p* q n_j, int p* dq/dn) over the cell basis.

    Each is an array over (basis member, column); the flux operator for the
    slave uses the master's ``p*`` with the slave's outward normal.
    """
    for pc in space.pieces:
        if pc.curved:
            w = pc.weights
            phi = space.basis.evaluate(pc.points)
            dn = np.einsum("pbj,pj->pb", space.basis.gradient(pc.points), pc.normals)
            plain = (phi * w[:, None]).T @ pc.V
            normal = np.stack([(phi * (w * pc.normals[:, j])[:, None]).T @ pc.V for j in range(3)])
            flux = (dn * w[:, None]).T @ pc.V
            return plain, normal, flux
    raise ValueError("cell has no curved face")
