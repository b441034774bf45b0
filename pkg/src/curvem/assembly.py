"""Global degrees of freedom, local space construction and sparse assembly.

Dirichlet degrees of freedom are eliminated through a lifting: the lifting
takes the Dirichlet data at Dirichlet dofs (Gauss-Lobatto interpolation on
straight edges, face moments on flat faces, exact data on curved entities)
and vanishes at free dofs, and ``a_h(lifting, phi_i)`` is moved to the
right-hand side.

Cells that are translates of each other (same shape, orientation pattern and
role) share one set of local matrices; only their data-dependent vectors are
evaluated per cell.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import (DIRICHLET, CellRole, Mesh, face_frame, master_of,
                       polygon_view)
from .local2d import LocalSpace, build_local_space_2d
from .local3d import FaceSpaceCache, build_local_space_3d, local_dofs_3d
from .polybasis import basis_dimension
from .problems import ProblemSpec
from .quadrature import curved_points_for, gauss_lobatto

log = logging.getLogger(__name__)


@dataclass
class Options:
    k: int
    n_curved: int | None = None  # Gauss points per direction on curved entities (default 3k+4)
    stabilize_twice: bool = False
    cache: bool = True

    @property
    def curved_points(self) -> int:
        return self.n_curved or curved_points_for(self.k)


@dataclass
class DofTable:
    """Global dof keys: free dofs first, then Dirichlet dofs."""

    keys: list
    index: dict
    n_free: int

    @property
    def size(self) -> int:
        return len(self.keys)

    @property
    def n_dirichlet(self) -> int:
        return len(self.keys) - self.n_free

    def lookup(self, keys) -> np.ndarray:
        idx = self.index
        return np.fromiter((idx[key] for key in keys), dtype=np.int64, count=len(keys))


def _dirichlet_entities(mesh: Mesh):
    dv, de, df = set(), set(), set()
    if mesh.dim == 2:
        for eid, e in enumerate(mesh.edges):
            if e.tag == DIRICHLET:
                de.add(eid)
                dv.update(e.v)
    else:
        for fid, f in enumerate(mesh.faces):
            if f.tag == DIRICHLET:
                df.add(fid)
                for eid, _ in f.edges:
                    de.add(eid)
                    dv.update(mesh.edges[eid].v)
    return dv, de, df


def enumerate_dofs(mesh: Mesh, k: int) -> DofTable:
    """Free dofs: vertices, Gauss-Lobatto nodes of straight edges, flat-face and cell moments off the Dirichlet boundary."""
    dv, de, df = _dirichlet_entities(mesh)
    free, fixed = [], []
    used = set()
    for cell in mesh.cells:
        for fid, _ in cell.boundary:
            if mesh.dim == 2:
                used.update(mesh.edges[fid].v)
            else:
                for eid, _ in mesh.faces[fid].edges:
                    used.update(mesh.edges[eid].v)
    for v in sorted(used):
        (fixed if v in dv else free).append(("vertex", v, 0))
    for eid, e in enumerate(mesh.edges):
        if e.curved:
            continue
        for i in range(k - 1):
            (fixed if eid in de else free).append(("edge", eid, i))
    if mesh.dim == 3:
        n2f = basis_dimension(k - 2, 2)
        for fid, f in enumerate(mesh.faces):
            if f.curved:
                continue
            for j in range(n2f):
                (fixed if fid in df else free).append(("face", fid, j))
    nc = basis_dimension(k - 2, mesh.dim)
    for cid in range(len(mesh.cells)):
        free.extend(("cell", cid, j) for j in range(nc))
    keys = free + fixed
    return DofTable(keys, {key: i for i, key in enumerate(keys)}, len(free))


def dirichlet_values(mesh: Mesh, k: int, table: DofTable, g_D, faces: FaceSpaceCache | None = None) -> np.ndarray:
    """Values of the lifting at the Dirichlet dofs (in table order)."""
    keys = table.keys[table.n_free:]
    out = np.zeros(len(keys))
    gl = gauss_lobatto(k)[0][1:-1] if k >= 2 else np.zeros(0)
    pts, rows = [], []
    for i, (kind, owner, j) in enumerate(keys):
        if kind == "vertex":
            pts.append(mesh.vertices[owner])
            rows.append(i)
        elif kind == "edge":
            a, b = mesh.vertices[list(mesh.edges[owner].v)]
            pts.append(a + gl[j] * (b - a))
            rows.append(i)
    if pts:
        out[rows] = g_D(np.array(pts))
    face_rows = [(i, owner, j) for i, (kind, owner, j) in enumerate(keys) if kind == "face"]
    if face_rows:
        if faces is None:
            raise ValueError("face moments need face spaces")
        by_face: dict = {}
        for i, fid, j in face_rows:
            by_face.setdefault(fid, []).append((i, j))
        for fid, items in by_face.items():
            fs = faces[fid]
            g = g_D(fs.points)
            vals = (fs.weights * g) @ fs.space.basis.evaluate(fs.points2d) / fs.measure
            for i, j in items:
                out[i] = vals[j]
    return out


# -- local spaces -----------------------------------------------------------------

def cell_keys(mesh: Mesh, cid: int, k: int) -> list:
    """Own dof keys of a cell, in local column order."""
    if mesh.dim == 3:
        return [d.key for d in local_dofs_3d(mesh, cid, k)]
    cell = mesh.cells[cid]
    keys = [("vertex", v, 0) for v in mesh.edge_loop_vertices(cell.boundary)]
    for eid, s in cell.boundary:
        if mesh.edges[eid].curved:
            continue
        idx = range(k - 1) if s > 0 else range(k - 2, -1, -1)
        keys.extend(("edge", eid, i) for i in idx)
    keys.extend(("cell", cid, j) for j in range(basis_dimension(k - 2, 2)))
    return keys


def column_keys(mesh: Mesh, cid: int, k: int, own_cache: dict | None = None) -> list:
    """Local column keys: own dofs, then (slave cells) the master's remaining dofs."""
    own_cache = {} if own_cache is None else own_cache

    def own(c):
        if c not in own_cache:
            own_cache[c] = cell_keys(mesh, c, k)
        return own_cache[c]

    keys = list(own(cid))
    if mesh.cells[cid].role == CellRole.SLAVE:
        mid, _ = master_of(mesh, cid)
        seen = set(keys)
        keys.extend(key for key in own(mid) if key not in seen)
    return keys


class _Signatures:
    """Translation-invariant fingerprints of cells (equal fingerprints => identical local matrices)."""

    DIGITS = 10

    def __init__(self, mesh: Mesh, options: Options):
        self.mesh = mesh
        self.options = options
        self.memo: dict = {}
        self.frames: dict = {}
        self.patch_samples: dict = {}

    def anchor(self, cid: int) -> np.ndarray:
        return self.mesh.vertices[self.mesh.cell_vertices(cid)[0]]

    def _round(self, x) -> tuple:
        return tuple(np.round(np.asarray(x, dtype=float).ravel(), self.DIGITS) + 0.0)

    def _frame(self, fid):
        if fid not in self.frames:
            axes, _ = face_frame(self.mesh, fid)
            self.frames[fid] = self._round(axes)
        return self.frames[fid]

    def _samples(self, ent, kind):
        key = (kind, id(ent))
        if key not in self.patch_samples:
            if kind == "curve":
                t = np.linspace(ent.t0, ent.t1, 7)
                self.patch_samples[key] = ent.point(t)
            else:
                g = np.array([0.1, 0.3, 0.5])
                uu, vv = np.meshgrid(g, g)
                if ent.reference == "rectangle":
                    (a0, a1), (b0, b1) = ent.reference_box()
                    self.patch_samples[key] = ent.point(a0 + uu.ravel() * (a1 - a0), b0 + vv.ravel() * (b1 - b0))
                else:
                    self.patch_samples[key] = ent.point(uu.ravel() * 0.6, vv.ravel() * 0.6)
        return self.patch_samples[key]

    def __call__(self, cid: int):
        if cid in self.memo:
            return self.memo[cid]
        mesh = self.mesh
        cell = mesh.cells[cid]
        if not self.options.cache or cell.role == CellRole.DIRICHLET_CURVED:
            sig = ("unique", cid)
            self.memo[cid] = sig
            return sig
        vids = mesh.cell_vertices(cid)
        anchor = mesh.vertices[vids[0]]
        parts = [cell.role.value, self._round(mesh.vertices[vids] - anchor)]
        if mesh.dim == 2:
            for eid, s in cell.boundary:
                e = mesh.edges[eid]
                entry = (s, e.tag, e.curved)
                if e.curved:
                    entry += self._round(self._samples(e.curve, "curve") - anchor)
                parts.append(entry)
        else:
            loc = {v: i for i, v in enumerate(vids)}
            for fid, s in cell.boundary:
                f = mesh.faces[fid]
                loop = tuple(loc[v] for v in mesh.face_vertices(fid))
                edges = tuple((loc[mesh.edges[e].v[0]], loc[mesh.edges[e].v[1]], mesh.edges[e].curved)
                              for e, _ in f.edges)
                entry = (s, f.tag, f.curved, loop, edges)
                if f.curved:
                    entry += self._round(self._samples(f.patch, "patch") - anchor)
                else:
                    entry += self._frame(fid)
                parts.append(entry)
        if cell.role == CellRole.SLAVE:
            mid, _ = master_of(mesh, cid)
            parts.append((self(mid), self._round(self.anchor(mid) - anchor)))
        sig = tuple(parts)
        self.memo[cid] = sig
        return sig


@dataclass
class CellGroup:
    """Cells sharing one representative local space."""

    space: LocalSpace
    cells: np.ndarray
    shifts: np.ndarray  # (ncells, dim): anchor(cell) - anchor(representative)
    columns: np.ndarray | None = None  # (ncells, ncols) global indices


@dataclass
class LocalSpaces:
    groups: list
    cell_group: np.ndarray
    diameters: np.ndarray
    faces: FaceSpaceCache | None = None


def build_local_spaces(mesh: Mesh, options: Options, problem: ProblemSpec | None = None) -> LocalSpaces:
    """Build the local spaces (masters before slaves), sharing matrices between translated cells."""
    k = options.k
    nq = options.curved_points
    faces = FaceSpaceCache(mesh, k, nq) if mesh.dim == 3 else None
    sigs = _Signatures(mesh, options)
    order = sorted(range(len(mesh.cells)), key=lambda c: mesh.cells[c].role == CellRole.SLAVE)
    built: dict = {}
    group_of_sig: dict = {}
    groups: list = []
    members: list = []
    cell_group = np.empty(len(mesh.cells), dtype=np.int64)
    anchors = np.array([sigs.anchor(c) for c in range(len(mesh.cells))])

    def build(cid):
        if cid in built:
            return built[cid]
        cell = mesh.cells[cid]
        master = None
        if cell.role == CellRole.SLAVE:
            master = build(master_of(mesh, cid)[0])
        g_D = problem.dirichlet if problem is not None else None
        if mesh.dim == 2:
            space = build_local_space_2d(polygon_view(mesh, cid), k, cell.role, n_curved=nq, master=master,
                                         dirichlet=g_D, stabilize_twice=options.stabilize_twice)
        else:
            space = build_local_space_3d(mesh, cid, k, cell.role, n_curved=nq, faces=faces, master=master,
                                         dirichlet=g_D, stabilize_twice=options.stabilize_twice)
        built[cid] = space
        return space

    for cid in order:
        sig = sigs(cid)
        g = group_of_sig.get(sig)
        if g is None:
            g = len(groups)
            group_of_sig[sig] = g
            groups.append(build(cid))
            members.append([cid])
        else:
            members[g].append(cid)
        cell_group[cid] = g
    out = []
    for g, space in enumerate(groups):
        cells = np.array(members[g], dtype=np.int64)
        shifts = anchors[cells] - anchors[cells[0]]
        out.append(CellGroup(space, cells, shifts))
    diam = np.array([groups[cell_group[c]].diameter for c in range(len(mesh.cells))])
    log.info("built %d local spaces for %d cells", len(groups), len(mesh.cells))
    return LocalSpaces(out, cell_group, diam, faces)


# -- global system ------------------------------------------------------------------

@dataclass
class GlobalSystem:
    mesh: Mesh
    options: Options
    problem: ProblemSpec
    table: DofTable
    spaces: LocalSpaces
    matrix: sp.csr_matrix  # free x free
    rhs: np.ndarray
    lifting: np.ndarray  # values at Dirichlet dofs
    lifting_rhs: np.ndarray = field(default=None)  # a_h(lifting, phi_i) for free i

    def full_vector(self, free_values: np.ndarray) -> np.ndarray:
        return np.concatenate([free_values, self.lifting])


def _region_eval(fn, X, regions, *extra):
    """Evaluate ``fn(X, ..., region)`` on stacked per-cell points."""
    nc, nq = X.shape[:2]
    out = np.empty((nc, nq))
    for r in np.unique(regions):
        sel = regions == r
        pts = X[sel].reshape(-1, X.shape[2])
        args = [a[sel].reshape(-1, a.shape[2]) for a in extra]
        out[sel] = np.asarray(fn(pts, *args, r), dtype=float).reshape(-1, nq)
    return out


def assemble(mesh: Mesh, options: Options, problem: ProblemSpec, spaces: LocalSpaces | None = None) -> GlobalSystem:
    """Assemble the symmetric system for the free dofs, lifting included."""
    if spaces is None:
        spaces = build_local_spaces(mesh, options, problem)
    k = options.k
    table = enumerate_dofs(mesh, k)
    nf = table.n_free
    lift = dirichlet_values(mesh, k, table, problem.dirichlet, spaces.faces)
    regions = np.array([c.region for c in mesh.cells])
    kappas = np.array([problem.kappa_of(r) for r in regions])
    own_cache: dict = {}

    rows_all, cols_all, vals_all = [], [], []
    rhs = np.zeros(table.size)
    lifting_rhs = np.zeros(table.size)
    for grp in spaces.groups:
        sp_ = grp.space
        cols = np.array([table.lookup(column_keys(mesh, c, k, own_cache)) for c in grp.cells])
        grp.columns = cols
        kap = kappas[grp.cells]
        K = sp_.Kc + sp_.Ks
        r = sp_.rc + sp_.rs
        # scatter rows belonging to free dofs only
        R = np.broadcast_to(cols[:, :, None], (len(cols),) + K.shape)
        C = np.broadcast_to(cols[:, None, :], (len(cols),) + K.shape)
        keep = R < nf
        Vv = kap[:, None, None] * K[None, :, :]
        Vv = np.broadcast_to(Vv, R.shape)
        rk, ck, vk = R[keep], C[keep], Vv[keep]
        inner = ck < nf
        rows_all.append(rk[inner].astype(np.int32))
        cols_all.append(ck[inner].astype(np.int32))
        vals_all.append(vk[inner])
        # lifting: a_h(g_bar, phi_i) = K x_D + r
        dcol = ~inner
        np.add.at(lifting_rhs, rk[dcol], vk[dcol] * lift[ck[dcol] - nf])
        if np.any(r):
            np.add.at(lifting_rhs, cols.ravel(), (kap[:, None] * r[None, :]).ravel())
        # load
        X = sp_.load_points[None, :, :] + grp.shifts[:, None, :]
        fv = _region_eval(problem.source, X, regions[grp.cells])
        F = ((fv * sp_.load_weights) @ sp_.load_values) @ sp_.load_operator
        for pc in sp_.neumann_pieces:
            Xn = pc.points[None, :, :] + grp.shifts[:, None, :]
            Nn = np.broadcast_to(pc.normals[None], Xn.shape)
            gv = _region_eval(problem.neumann, Xn, regions[grp.cells], Nn)
            F += (gv * pc.weights) @ pc.V
        np.add.at(rhs, cols.ravel(), F.ravel())
    rows = np.concatenate(rows_all) if rows_all else np.zeros(0, np.int32)
    cols_ = np.concatenate(cols_all) if cols_all else np.zeros(0, np.int32)
    vals = np.concatenate(vals_all) if vals_all else np.zeros(0)
    A = sp.csr_matrix((vals, (rows, cols_)), shape=(nf, nf))
    A.sum_duplicates()
    b = rhs[:nf] - lifting_rhs[:nf]
    return GlobalSystem(mesh, options, problem, table, spaces, A, b, lift, lifting_rhs[:nf])


def apply_lifting(system: GlobalSystem) -> np.ndarray:
    """Right-hand-side correction ``-a_h(g_bar, phi_i)`` already folded into ``system.rhs``."""
    return -system.lifting_rhs
