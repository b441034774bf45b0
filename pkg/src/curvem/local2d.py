"""Local virtual element spaces on 2D cells with at most one curved edge.

Every boundary integral a projector needs is written as a sum over
*boundary pieces*: weighted points with normals and a matrix ``V`` giving
the value of the virtual function at each point as a linear function of the
local columns, plus an optional fixed part ``v0`` (known Dirichlet data on a
curved edge). On straight edges the points are the Gauss-Lobatto nodes, which
are degrees of freedom; on curved edges the values come from the polynomial
trace ``p*`` fitted to the degrees of freedom of the master cell.

Local columns are the cell's own degrees of freedom followed, for slave
cells, by the master's degrees of freedom that the slave does not own.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .geometry import CellRole, NEUMANN, PolygonView
from .polybasis import ScaledMonomialBasis, basis_dimension, product_table
from .quadrature import (cell_rule, curved_points_for, edge_rule, gauss_legendre, gauss_lobatto,
                         geometric_measures, monomial_moments)

CURVED_ROLES_WITH_TRACE = (CellRole.MASTER, CellRole.NEUMANN_CURVED)


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class DofDescriptor:
    """A degree of freedom: ``kind`` is vertex, edge, face or cell."""

    kind: str
    owner: int
    index: int = 0

    @property
    def key(self) -> tuple:
        return (self.kind, self.owner, self.index)


@dataclass
class BoundaryPiece:
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    V: np.ndarray  # (npoints, ncols)
    v0: np.ndarray | None = None  # (npoints,)
    curved: bool = False


@dataclass
class TraceOperator:
    """Maps own dof values to the coefficients of ``p*`` over the cell basis."""

    matrix: np.ndarray
    basis: ScaledMonomialBasis
    kind: str
    endpoints: tuple[int, ...] = ()


@dataclass
class DofFunctionals:
    """Enough data to apply a cell's own dof functionals to any polynomial basis."""

    point_rows: np.ndarray
    points: np.ndarray
    face_rows: list = field(default_factory=list)  # (rows, pts, weights, face-basis values / |f|)
    moment_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    moment_points: np.ndarray | None = None
    moment_weights: np.ndarray | None = None
    moment_values: np.ndarray | None = None  # cell basis of degree k-2 at moment points, divided by |E|
    size: int = 0

    def apply(self, basis: ScaledMonomialBasis) -> np.ndarray:
        out = np.zeros((self.size, len(basis)))
        if len(self.point_rows):
            out[self.point_rows] = basis.evaluate(self.points)
        for rows, pts, w, fv in self.face_rows:
            out[rows] = (fv * w[:, None]).T @ basis.evaluate(pts)
        if len(self.moment_rows):
            out[self.moment_rows] = (self.moment_values * self.moment_weights[:, None]).T @ basis.evaluate(
                self.moment_points)
        return out


@dataclass
class LocalSpace:
    """Projectors, stiffness and load operators of one cell (kappa = 1)."""

    ident: int
    dim: int
    k: int
    role: CellRole
    measure: float
    centroid: np.ndarray
    diameter: float
    basis: ScaledMonomialBasis
    dofs: list  # DofDescriptor per column
    n_own: int
    H: np.ndarray
    P: np.ndarray
    p0: np.ndarray
    G: np.ndarray  # (dim, n_{k-1}, ncols)
    g0: np.ndarray
    Q: np.ndarray
    q0: np.ndarray
    D: np.ndarray
    mask: np.ndarray
    Kc: np.ndarray | None = None
    Ks: np.ndarray | None = None
    rc: np.ndarray | None = None
    rs: np.ndarray | None = None
    trace: TraceOperator | None = None
    functionals: DofFunctionals | None = None
    load_points: np.ndarray | None = None
    load_weights: np.ndarray | None = None
    load_values: np.ndarray | None = None  # degree k-1 basis at load points
    load_operator: np.ndarray | None = None  # (n_{k-1}, ncols): f-coefficients -> load
    neumann_pieces: list = field(default_factory=list)
    pieces: list = field(default_factory=list)

    @property
    def ncols(self) -> int:
        return len(self.dofs)

    @property
    def keys(self) -> list:
        return [d.key for d in self.dofs]

    def stiffness(self, kappa: float = 1.0):
        """Local matrix and affine vector (known boundary data) for a given kappa."""
        return kappa * (self.Kc + self.Ks), kappa * (self.rc + self.rs)

    def pi_nabla(self, x):
        return self.P @ x + self.p0

    def pi0_grad(self, x):
        return np.einsum("jbc,c->jb", self.G, x) + self.g0

    def pi0(self, x):
        return self.Q @ x + self.q0

    def load_vector(self, f: Callable, shift=None) -> np.ndarray:
        """``int_E Pi0_{k-1} f . Pi0_k v`` for every column."""
        pts = self.load_points if shift is None else self.load_points + shift
        fv = np.asarray(f(pts), dtype=float)
        return ((self.load_weights * fv) @ self.load_values) @ self.load_operator

    def neumann_vector(self, g: Callable, shift=None) -> np.ndarray:
        out = np.zeros(self.ncols)
        for piece in self.neumann_pieces:
            pts = piece.points if shift is None else piece.points + shift
            out += (piece.weights * np.asarray(g(pts, piece.normals), dtype=float)) @ piece.V
        return out


# -- shared projector algebra ------------------------------------------------

def mass_matrix(moments: np.ndarray, k: int, dim: int) -> np.ndarray:
    """Gram matrix of the degree-``k`` basis from moments up to degree ``2k``."""
    return moments[product_table(k, k, dim)]


def stiffness_gram(basis: ScaledMonomialBasis, H: np.ndarray) -> np.ndarray:
    k, d = basis.degree, basis.dim
    n1 = basis_dimension(k - 1, d)
    Dm = basis.derivative_matrices()
    H1 = H[:n1, :n1]
    return sum(Dm[j] @ H1 @ Dm[j].T for j in range(d))


def _solve(A, B, what: str):
    try:
        lu = scipy.linalg.lu_factor(A, check_finite=True)
    except (ValueError, scipy.linalg.LinAlgError) as exc:
        raise SingularSystemError(f"singular {what} system") from exc
    if np.min(np.abs(np.diag(lu[0]))) <= 1e-14 * np.max(np.abs(np.diag(lu[0]))):
        raise SingularSystemError(f"singular {what} system")
    return scipy.linalg.lu_solve(lu, B)


def build_projectors(basis: ScaledMonomialBasis, H: np.ndarray, measure: float, pieces: list,
                     moment_cols: np.ndarray, ncols: int) -> dict:
    """Pi-nabla, Pi0-gradient and Pi0_k as affine maps of the local columns.

    ``moment_cols[j]`` is the column of the cell moment ``|E|^-1 int v p_j``.
    """
    k, d = basis.degree, basis.dim
    nb = len(basis)
    n1 = basis_dimension(k - 1, d)
    n2 = basis_dimension(k - 2, d)
    b1 = basis.with_degree(k - 1) if k >= 1 else None

    A = stiffness_gram(basis, H)
    B = np.zeros((nb, ncols))
    b0 = np.zeros(nb)
    R = np.zeros((d, n1, ncols))
    r0 = np.zeros((d, n1))
    mean_row = np.zeros(nb)
    for pc in pieces:
        w = pc.weights
        phi = basis.evaluate(pc.points)
        dn = np.einsum("pbj,pj->pb", basis.gradient(pc.points), pc.normals)
        mean_row += w @ phi
        B += (dn * w[:, None]).T @ pc.V
        B[0] += w @ pc.V
        phi1 = phi[:, :n1]
        for j in range(d):
            R[j] += (phi1 * (w * pc.normals[:, j])[:, None]).T @ pc.V
        if pc.v0 is not None:
            b0 += (dn * w[:, None]).T @ pc.v0
            b0[0] += w @ pc.v0
            for j in range(d):
                r0[j] += (phi1 * (w * pc.normals[:, j])[:, None]).T @ pc.v0
    A[0] = mean_row
    if n2 > 0:
        lap = basis.laplacian_table()
        B[:, moment_cols] -= measure * lap
        Dm1 = b1.derivative_matrices()
        for j in range(d):
            R[j][:, moment_cols] -= measure * Dm1[j]
    rhs = np.concatenate([B, b0[:, None]], axis=1)
    sol = _solve(A, rhs, "Pi-nabla")
    P, p0 = sol[:, :-1], sol[:, -1]

    H1 = H[:n1, :n1]
    G = np.empty((d, n1, ncols))
    g0 = np.empty((d, n1))
    for j in range(d):
        s = _solve(H1, np.concatenate([R[j], r0[j][:, None]], axis=1), "Pi0-gradient")
        G[j], g0[j] = s[:, :-1], s[:, -1]

    M = np.zeros((nb, ncols))
    m0 = np.zeros(nb)
    low = basis.degrees <= k - 2
    M[np.flatnonzero(low), moment_cols] = measure
    high = ~low
    M[high] = H[high] @ P
    m0[high] = H[high] @ p0
    s = _solve(H, np.concatenate([M, m0[:, None]], axis=1), "Pi0")
    return {"P": P, "p0": p0, "G": G, "g0": g0, "Q": s[:, :-1], "q0": s[:, -1]}


def stiffness_parts(G, g0, H, P, p0, D, mask, stab_scale: float):
    """Consistency and stabilization matrices with their affine vectors (kappa = 1)."""
    n1 = G.shape[1]
    H1 = H[:n1, :n1]
    Kc = sum(G[j].T @ H1 @ G[j] for j in range(G.shape[0]))
    rc = sum(G[j].T @ H1 @ g0[j] for j in range(G.shape[0]))
    Rm = np.eye(D.shape[0]) - D @ P
    r = -D @ p0
    Rw = Rm * mask[:, None]
    Ks = stab_scale * (Rm.T @ Rw)
    rs = stab_scale * (Rw.T @ r)
    Kc = 0.5 * (Kc + Kc.T)
    Ks = 0.5 * (Ks + Ks.T)
    return Kc, rc, Ks, rs


def load_operator(H, Q, q0, k: int, dim: int):
    n1 = basis_dimension(k - 1, dim)
    H1 = H[:n1, :n1]
    return scipy.linalg.solve(H1, H[:n1] @ Q, assume_a="sym")


# -- 2D traces -----------------------------------------------------------------

def trace_pstar_triangle_matrix(A: np.ndarray) -> np.ndarray:
    """Inverse of the square dof-to-P_k interpolation matrix."""
    if A.shape[0] != A.shape[1]:
        raise ValueError("triangle-like system must be square")
    return _solve(A, np.eye(A.shape[0]), "triangle interpolation")


def trace_pstar_lsq_matrix(A: np.ndarray, endpoint_rows) -> np.ndarray:
    """Least squares over all conditions, with the endpoint conditions imposed exactly.

    The two constraints are eliminated through a QR factorization of their
    transpose; the remaining problem is solved by QR as well.
    """
    n, nb = A.shape
    endpoint_rows = list(endpoint_rows)
    rest = [i for i in range(n) if i not in endpoint_rows]
    C = A[endpoint_rows]
    Qc, Rc = np.linalg.qr(C.T, mode="complete")
    m = len(endpoint_rows)
    Rc = Rc[:m]
    if np.min(np.abs(np.diag(Rc))) <= 1e-13 * np.max(np.abs(np.diag(Rc))):
        raise SingularSystemError("dependent endpoint constraints")
    Q1, Z = Qc[:, :m], Qc[:, m:]
    # particular part: c_p = Q1 Rc^-T S_e x
    Rinv_T = scipy.linalg.solve_triangular(Rc, np.eye(m), trans="T")
    Se = np.zeros((m, n))
    Se[np.arange(m), endpoint_rows] = 1.0
    Sr = np.zeros((len(rest), n))
    Sr[np.arange(len(rest)), rest] = 1.0
    Cp = Q1 @ Rinv_T @ Se
    Ar = A[rest]
    AZ = Ar @ Z
    Qa, Ra = np.linalg.qr(AZ)
    diag = np.abs(np.diag(Ra))
    if diag.size and np.min(diag) <= 1e-12 * np.max(diag):
        raise SingularSystemError("rank-deficient least-squares trace system")
    Y = scipy.linalg.solve_triangular(Ra, Qa.T @ (Sr - Ar @ Cp))
    return Cp + Z @ Y


def lsq_matrix(A: np.ndarray) -> np.ndarray:
    """Unconstrained least-squares solution operator via QR (full column rank required)."""
    Qa, Ra = np.linalg.qr(A)
    diag = np.abs(np.diag(Ra))
    if np.min(diag) <= 1e-12 * np.max(diag):
        raise SingularSystemError("rank-deficient least-squares system")
    return scipy.linalg.solve_triangular(Ra, Qa.T)


# -- 2D local space ------------------------------------------------------------

def local_dofs(view: PolygonView, k: int, cell_id: int | None = None, moment_kind: str = "cell"):
    """Own dofs: vertices, then Gauss-Lobatto nodes per straight edge, then moments."""
    owner = view.ident if cell_id is None else cell_id
    dofs = [DofDescriptor("vertex", v) for v in view.vertex_ids]
    for seg in view.segments:
        if seg.curved:
            continue
        idx = range(k - 1) if seg.sign > 0 else range(k - 2, -1, -1)
        dofs.extend(DofDescriptor("edge", seg.edge_id, i) for i in idx)
    dofs.extend(DofDescriptor(moment_kind, owner, j) for j in range(basis_dimension(k - 2, 2)))
    return dofs


def _point_dofs_2d(view: PolygonView, k: int):
    pts = [seg.start for seg in view.segments]
    if k >= 2:
        s = gauss_lobatto(k)[0][1:-1]
        for seg in view.segments:
            if not seg.curved:
                pts.extend(seg.point(s))
    return np.array(pts).reshape(-1, 2)


def _straight_edge_columns(view: PolygonView, k: int):
    """For each segment the column list along the traversal (start vertex, GL nodes, end vertex)."""
    nv = len(view.segments)
    out = []
    nxt = nv
    for i, seg in enumerate(view.segments):
        if seg.curved:
            out.append(None)
            continue
        cols = [i] + list(range(nxt, nxt + k - 1)) + [(i + 1) % nv]
        nxt += k - 1
        out.append(cols)
    return out


@dataclass
class Geometry2D:
    measure: float
    centroid: np.ndarray
    diameter: float
    basis: ScaledMonomialBasis
    H: np.ndarray
    moments: np.ndarray


def cell_geometry(view, k: int, n_curved: int | None) -> Geometry2D:
    measure, centroid, h = geometric_measures(view, n_curved)
    basis = ScaledMonomialBasis(view.dim, k, centroid, h)
    mom = monomial_moments(view, basis.with_degree(2 * k), 2 * k, n_curved)
    return Geometry2D(measure, centroid, h, basis, mass_matrix(mom, k, view.dim), mom)


def dof_matrix_2d(view: PolygonView, k: int, geo: Geometry2D) -> np.ndarray:
    """Own dof values of every basis member (rows: dofs, columns: monomials)."""
    pts = _point_dofs_2d(view, k)
    n2 = basis_dimension(k - 2, 2)
    return np.vstack([geo.basis.evaluate(pts), geo.H[:n2] / geo.measure])


def _curved_index(view: PolygonView):
    idx = [i for i, s in enumerate(view.segments) if s.curved]
    if len(idx) > 1:
        raise ValueError("cell has more than one curved edge")
    return idx[0] if idx else None


def trace_operator_2d(view: PolygonView, k: int, geo: Geometry2D, D_own: np.ndarray | None = None) -> TraceOperator:
    """``p*`` for a cell with one curved edge: square solve or constrained least squares."""
    ci = _curved_index(view)
    if ci is None:
        raise ValueError("cell has no curved edge")
    A = dof_matrix_2d(view, k, geo) if D_own is None else D_own
    nv = len(view.segments)
    ends = (ci, (ci + 1) % nv)
    n_straight = sum(not s.curved for s in view.segments)
    nb = len(geo.basis)
    if A.shape[0] == nb and n_straight == 2:
        return TraceOperator(trace_pstar_triangle_matrix(A), geo.basis, "triangle", ends)
    if A.shape[0] > nb:
        return TraceOperator(trace_pstar_lsq_matrix(A, ends), geo.basis, "lsq", ends)
    if A.shape[0] == nb:
        return TraceOperator(trace_pstar_triangle_matrix(A), geo.basis, "square", ends)
    raise SingularSystemError(f"{A.shape[0]} conditions cannot determine P_{k} (dimension {nb})")


def trace_pstar_triangle(view: PolygonView, k: int, n_curved: int | None = None) -> TraceOperator:
    if sum(not s.curved for s in view.segments) != 2 or _curved_index(view) is None:
        raise ValueError("triangle-like cell needs two straight edges and one curved edge")
    geo = cell_geometry(view, k, n_curved)
    return TraceOperator(trace_pstar_triangle_matrix(dof_matrix_2d(view, k, geo)), geo.basis, "triangle")


def trace_pstar_lsq(view: PolygonView, k: int, n_curved: int | None = None) -> TraceOperator:
    geo = cell_geometry(view, k, n_curved)
    return trace_operator_2d(view, k, geo)


def build_local_space_2d(view: PolygonView, k: int, role: CellRole = CellRole.PLAIN, *,
                         n_curved: int | None = None, master: LocalSpace | None = None,
                         dirichlet: Callable | None = None, stabilize_twice: bool = False,
                         projections_only: bool = False, moment_kind: str = "cell") -> LocalSpace:
    """Assemble every local operator of a 2D cell.

    ``master`` is the master's local space (slave cells only); ``dirichlet``
    evaluates the Dirichlet datum on a curved Dirichlet edge.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n_curved = n_curved or curved_points_for(k)
    geo = cell_geometry(view, k, n_curved)
    basis = geo.basis
    own = local_dofs(view, k, moment_kind=moment_kind)
    n_own = len(own)
    n2 = basis_dimension(k - 2, 2)
    D_own = dof_matrix_2d(view, k, geo)
    ci = _curved_index(view)

    trace = None
    if ci is not None:
        if role in (CellRole.PLAIN,):
            role = CellRole.MASTER if projections_only else role
        if role in CURVED_ROLES_WITH_TRACE:
            trace = trace_operator_2d(view, k, geo, D_own)
        elif role == CellRole.PLAIN:
            raise ValueError("plain cell with a curved edge")

    dofs = list(own)
    master_cols = None
    if role == CellRole.SLAVE:
        if master is None or master.trace is None:
            raise ValueError("slave cell needs its master's trace operator")
        index = {d.key: i for i, d in enumerate(own)}
        master_cols = np.empty(master.n_own, dtype=int)
        for i, d in enumerate(master.dofs[:master.n_own]):
            if d.key in index:
                master_cols[i] = index[d.key]
            else:
                master_cols[i] = len(dofs)
                index[d.key] = len(dofs)
                dofs.append(d)
    ncols = len(dofs)
    moment_cols = np.arange(n_own - n2, n_own)

    pieces = []
    gl_s, gl_w = gauss_lobatto(k)
    edge_cols = _straight_edge_columns(view, k)
    for i, seg in enumerate(view.segments):
        if not seg.curved:
            pts = seg.point(gl_s)
            d = seg.end - seg.start
            L = np.linalg.norm(d)
            nrm = np.repeat((np.array([d[1], -d[0]]) / L)[None, :], len(gl_s), axis=0)
            V = np.zeros((len(gl_s), ncols))
            V[np.arange(len(gl_s)), edge_cols[i]] = 1.0
            pieces.append(BoundaryPiece(pts, gl_w * L, nrm, V))
            continue
        pts, w, nrm = edge_rule(seg, 2 * k, n_curved)
        V = np.zeros((len(w), ncols))
        v0 = None
        if trace is not None:
            V[:, :n_own] = basis.evaluate(pts) @ trace.matrix
        elif role == CellRole.SLAVE:
            np.add.at(V.T, master_cols, (master.basis.evaluate(pts) @ master.trace.matrix).T)
        elif role == CellRole.DIRICHLET_CURVED:
            if dirichlet is None:
                raise ValueError("curved Dirichlet cell needs boundary data")
            v0 = np.asarray(dirichlet(pts), dtype=float)
        else:
            raise ValueError(f"curved edge on a {role.value} cell")
        pieces.append(BoundaryPiece(pts, w, nrm, V, v0, curved=True))

    proj = build_projectors(basis, geo.H, geo.measure, pieces, moment_cols, ncols)

    functionals = DofFunctionals(
        point_rows=np.arange(n_own - n2), points=_point_dofs_2d(view, k), size=n_own)
    lpts, lw = cell_rule(view, 2 * k + 2, n_curved, centre=geo.centroid)
    if n2:
        functionals.moment_rows = moment_cols.copy()
        functionals.moment_points = lpts
        functionals.moment_weights = lw
        functionals.moment_values = basis.with_degree(k - 2).evaluate(lpts) / geo.measure

    D = np.zeros((ncols, len(basis)))
    D[:n_own] = D_own
    mask = np.zeros(ncols, dtype=bool)
    mask[:n_own] = True
    if master_cols is not None:
        extra = np.setdiff1d(np.arange(ncols), np.arange(n_own))
        if stabilize_twice:
            mvals = master.functionals.apply(basis)
            inv = {c: i for i, c in enumerate(master_cols)}
            for c in extra:
                D[c] = mvals[inv[c]]
            mask[extra] = True

    space = LocalSpace(view.ident, 2, k, role, geo.measure, geo.centroid, geo.diameter, basis, dofs, n_own,
                       geo.H, proj["P"], proj["p0"], proj["G"], proj["g0"], proj["Q"], proj["q0"], D, mask,
                       trace=trace, functionals=functionals, pieces=pieces)
    if projections_only:
        return space
    space.Kc, space.rc, space.Ks, space.rs = stiffness_parts(
        proj["G"], proj["g0"], geo.H, proj["P"], proj["p0"], D, mask.astype(float), 1.0)
    space.load_points = lpts
    space.load_weights = lw
    space.load_values = basis.with_degree(k - 1).evaluate(lpts)
    space.load_operator = load_operator(geo.H, proj["Q"], proj["q0"], k, 2)
    space.neumann_pieces = _neumann_pieces_2d(view, k, basis, trace, n_own, ncols, n_curved, edge_cols)
    return space


def lagrange_matrix(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Values at ``x`` of the Lagrange basis on ``nodes``."""
    L = np.ones((len(x), len(nodes)))
    for j, xj in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != j:
                L[:, j] *= (x - xm) / (xj - xm)
    return L


def _neumann_pieces_2d(view, k, basis, trace, n_own, ncols, n_curved, edge_cols):
    out = []
    gl_s = gauss_lobatto(k)[0]
    for i, seg in enumerate(view.segments):
        if seg.tag != NEUMANN:
            continue
        if seg.curved:
            pts, w, nrm = edge_rule(seg, 2 * k, n_curved)
            V = np.zeros((len(w), ncols))
            V[:, :n_own] = basis.evaluate(pts) @ trace.matrix
        else:
            s, ws = gauss_legendre(k + 4)
            pts = seg.point(s)
            d = seg.end - seg.start
            L = np.linalg.norm(d)
            w = ws * L
            nrm = np.repeat((np.array([d[1], -d[0]]) / L)[None, :], len(s), axis=0)
            V = np.zeros((len(s), ncols))
            V[:, edge_cols[i]] = lagrange_matrix(gl_s, s)
        out.append(BoundaryPiece(pts, w, nrm, V))
    return out


def local_stiffness(space: LocalSpace, kappa: float = 1.0):
    """(matrix over local columns, stabilization mask)."""
    K, _ = space.stiffness(kappa)
    return K, space.mask.copy()


def project_nabla(space: LocalSpace):
    return space.P, space.p0


def project_l2_grad(space: LocalSpace):
    return space.G, space.g0


def project_l2(space: LocalSpace):
    return space.Q, space.q0


def local_load(space: LocalSpace, f: Callable) -> np.ndarray:
    return space.load_vector(f)


def local_neumann(space: LocalSpace, g: Callable) -> np.ndarray:
    return space.neumann_vector(g)


def dirichlet_contrib(space: LocalSpace, dof_values: np.ndarray, kappa: float = 1.0) -> np.ndarray:
    """``a_h^E(g_bar, phi_i)`` for the lifting whose column values are ``dof_values``.

    ``dof_values`` holds the Dirichlet data at Dirichlet columns and zero at
    free columns; a curved Dirichlet edge contributes through the fixed part
    stored in the boundary pieces.
    """
    K, r = space.stiffness(kappa)
    return K @ dof_values + r
