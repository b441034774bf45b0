"""Curved polytopal mesh data model, validation and role assignment.

Edges may carry a parametric :class:`Curve`, faces a parametric
:class:`SurfacePatch`. Cells reference their boundary entities with an
orientation sign: ``+1`` keeps the entity orientation, ``-1`` reverses it.
For 2D cells the traversal is counterclockwise; for 3D cells a ``+1`` face
has its loop normal (right-hand rule) pointing out of the cell.
"""

from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field

import numpy as np

INTERIOR = "interior"
DIRICHLET = "dirichlet"
NEUMANN = "neumann"
TAGS = (INTERIOR, DIRICHLET, NEUMANN)


class CellRole(str, enum.Enum):
    PLAIN = "plain"
    MASTER = "master"
    SLAVE = "slave"
    DIRICHLET_CURVED = "dirichlet_curved"
    NEUMANN_CURVED = "neumann_curved"


class MeshError(ValueError):
    pass


def _vec(x, d=None):
    a = np.asarray(x, dtype=float)
    return a if d is None else a.reshape(d)


class Curve:
    """Parametric curve ``gamma(t)``, ``t in [t0, t1]``, running from the edge's first vertex to its second.

    Kinds and parameters:

    - ``circular_arc``: center, radius, optional orthonormal ``axes`` (u, v) for 3D.
    - ``polar_graph``: center, a, b, m, phase; radius ``a + b sin(m t + phase)``.
    - ``cubic_bubble``: start, end, amplitude, optional ``normal``; offset
      ``amplitude * L * 27/4 * s (1 - s)^2`` along the normal, ``s`` normalized parameter.
    - ``segment``: start, end.
    """

    KINDS = ("circular_arc", "polar_graph", "cubic_bubble", "segment")

    def __init__(self, kind: str, params: dict, t0: float, t1: float):
        if kind not in self.KINDS:
            raise MeshError(f"unknown curve kind {kind!r}")
        self.kind = kind
        self.params = dict(params)
        self.t0 = float(t0)
        self.t1 = float(t1)
        self._check_params()

    _REQUIRED = {
        "circular_arc": ("center", "radius"),
        "polar_graph": ("center", "a", "b", "m"),
        "cubic_bubble": ("start", "end", "amplitude"),
        "segment": ("start", "end"),
    }

    def _check_params(self):
        missing = [p for p in self._REQUIRED[self.kind] if p not in self.params]
        if missing:
            raise MeshError(f"curve {self.kind} missing parameters {missing}")

    @property
    def dim(self) -> int:
        p = self.params
        ref = p["center"] if "center" in p else p["start"]
        return len(ref)

    def _arc_axes(self):
        p = self.params
        if "axes" in p:
            u, v = (_vec(a) for a in p["axes"])
        else:
            u, v = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        return u, v

    def _bubble_frame(self):
        p = self.params
        a, b = _vec(p["start"]), _vec(p["end"])
        d = b - a
        length = np.linalg.norm(d)
        if "normal" in p:
            n = _vec(p["normal"])
        else:
            n = np.array([-d[1], d[0]]) / length
        return a, d, length, n

    def point(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p = self.params
        if self.kind == "circular_arc":
            u, v = self._arc_axes()
            c, r = _vec(p["center"]), float(p["radius"])
            return c + r * (np.cos(t)[:, None] * u + np.sin(t)[:, None] * v)
        if self.kind == "polar_graph":
            c = _vec(p["center"])
            rad = p["a"] + p["b"] * np.sin(p["m"] * t + p.get("phase", 0.0))
            return c + rad[:, None] * np.stack([np.cos(t), np.sin(t)], axis=1)
        if self.kind == "cubic_bubble":
            a, d, length, n = self._bubble_frame()
            s = (t - self.t0) / (self.t1 - self.t0)
            bump = p["amplitude"] * length * 6.75 * s * (1 - s) ** 2
            return a + s[:, None] * d + bump[:, None] * n
        a, b = _vec(p["start"]), _vec(p["end"])
        s = (t - self.t0) / (self.t1 - self.t0)
        return a + s[:, None] * (b - a)

    def derivative(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p = self.params
        if self.kind == "circular_arc":
            u, v = self._arc_axes()
            r = float(p["radius"])
            return r * (-np.sin(t)[:, None] * u + np.cos(t)[:, None] * v)
        if self.kind == "polar_graph":
            m, ph = p["m"], p.get("phase", 0.0)
            rad = p["a"] + p["b"] * np.sin(m * t + ph)
            drad = p["b"] * m * np.cos(m * t + ph)
            ct, st = np.cos(t), np.sin(t)
            return np.stack([drad * ct - rad * st, drad * st + rad * ct], axis=1)
        dt = self.t1 - self.t0
        if self.kind == "cubic_bubble":
            a, d, length, n = self._bubble_frame()
            s = (t - self.t0) / dt
            dbump = p["amplitude"] * length * 6.75 * (1 - s) * (1 - 3 * s)
            return (d + dbump[:, None] * n) / dt
        a, b = _vec(p["start"]), _vec(p["end"])
        return np.repeat(((b - a) / dt)[None, :], t.size, axis=0)

    def to_dict(self) -> dict:
        return {"type": self.kind, "params": _jsonable(self.params), "t0": self.t0, "t1": self.t1}

    def translated(self, shift) -> "Curve":
        shift = _vec(shift)
        p = copy.deepcopy(self.params)
        for key in ("center", "start", "end"):
            if key in p:
                p[key] = (_vec(p[key]) + shift).tolist()
        return Curve(self.kind, p, self.t0, self.t1)


class SurfacePatch:
    """Parametric surface ``sigma(u, v)`` on a reference domain.

    Kinds:

    - ``spherical_cap``: center, radius, axis, angle; domain ``[0, angle] x [0, 2 pi]``.
    - ``bubble_triangle``: vertices a, b, c, amplitude, normal; domain the unit
      triangle; offset ``amplitude * 27 u v (1 - u - v)`` along the normal.
    - ``graph``: x0, x1, y0, y1, z0, amplitude; domain the unit square;
      ``z = z0 + amplitude * 16 u (1-u) v (1-v)``.
    """

    KINDS = ("spherical_cap", "bubble_triangle", "graph")
    _REQUIRED = {
        "spherical_cap": ("center", "radius", "axis", "angle"),
        "bubble_triangle": ("a", "b", "c", "amplitude", "normal"),
        "graph": ("x0", "x1", "y0", "y1", "z0", "amplitude"),
    }

    def __init__(self, kind: str, params: dict):
        if kind not in self.KINDS:
            raise MeshError(f"unknown surface kind {kind!r}")
        missing = [p for p in self._REQUIRED[kind] if p not in params]
        if missing:
            raise MeshError(f"surface {kind} missing parameters {missing}")
        self.kind = kind
        self.params = dict(params)

    @property
    def reference(self) -> str:
        return {"spherical_cap": "rectangle", "bubble_triangle": "triangle", "graph": "rectangle"}[self.kind]

    def reference_box(self):
        if self.kind == "spherical_cap":
            return (0.0, float(self.params["angle"])), (0.0, 2 * np.pi)
        return (0.0, 1.0), (0.0, 1.0)

    def _cap_frame(self):
        e3 = _vec(self.params["axis"])
        e3 = e3 / np.linalg.norm(e3)
        trial = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = trial - e3 * (trial @ e3)
        e1 /= np.linalg.norm(e1)
        return e1, np.cross(e3, e1), e3

    def point(self, u, v) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        p = self.params
        if self.kind == "spherical_cap":
            e1, e2, e3 = self._cap_frame()
            c, r = _vec(p["center"]), float(p["radius"])
            su = np.sin(u)
            return c + r * ((su * np.cos(v))[:, None] * e1 + (su * np.sin(v))[:, None] * e2
                            + np.cos(u)[:, None] * e3)
        if self.kind == "bubble_triangle":
            a, b, c = _vec(p["a"]), _vec(p["b"]), _vec(p["c"])
            n = _vec(p["normal"])
            bump = p["amplitude"] * 27.0 * u * v * (1 - u - v)
            return a + u[:, None] * (b - a) + v[:, None] * (c - a) + bump[:, None] * n
        x = p["x0"] + u * (p["x1"] - p["x0"])
        y = p["y0"] + v * (p["y1"] - p["y0"])
        z = p["z0"] + p["amplitude"] * 16.0 * u * (1 - u) * v * (1 - v)
        return np.stack([x, y, z], axis=1)

    def partials(self, u, v):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        v = np.atleast_1d(np.asarray(v, dtype=float))
        p = self.params
        if self.kind == "spherical_cap":
            e1, e2, e3 = self._cap_frame()
            r = float(p["radius"])
            cu, su, cv, sv = np.cos(u), np.sin(u), np.cos(v), np.sin(v)
            du = r * ((cu * cv)[:, None] * e1 + (cu * sv)[:, None] * e2 - su[:, None] * e3)
            dv = r * ((-su * sv)[:, None] * e1 + (su * cv)[:, None] * e2)
            return du, dv
        if self.kind == "bubble_triangle":
            a, b, c = _vec(p["a"]), _vec(p["b"]), _vec(p["c"])
            n = _vec(p["normal"])
            amp = p["amplitude"] * 27.0
            du = (b - a) + (amp * v * (1 - 2 * u - v))[:, None] * n
            dv = (c - a) + (amp * u * (1 - u - 2 * v))[:, None] * n
            return du, dv
        lx, ly = p["x1"] - p["x0"], p["y1"] - p["y0"]
        amp = p["amplitude"] * 16.0
        zero = np.zeros_like(u)
        du = np.stack([np.full_like(u, lx), zero, amp * (1 - 2 * u) * v * (1 - v)], axis=1)
        dv = np.stack([zero, np.full_like(u, ly), amp * u * (1 - u) * (1 - 2 * v)], axis=1)
        return du, dv

    def boundary_samples(self, n: int = 64) -> np.ndarray:
        """Points on the reference-domain boundary mapped to the surface, plus interior samples."""
        if self.reference == "triangle":
            s = np.linspace(0, 1, n // 3 + 1)
            u = np.concatenate([s, 1 - s, np.zeros_like(s)])
            v = np.concatenate([np.zeros_like(s), s, 1 - s])
        else:
            (a0, a1), (b0, b1) = self.reference_box()
            s = np.linspace(0, 1, n // 4 + 1)
            u = np.concatenate([a0 + s * (a1 - a0), np.full_like(s, a1), a1 - s * (a1 - a0), np.full_like(s, a0)])
            v = np.concatenate([np.full_like(s, b0), b0 + s * (b1 - b0), np.full_like(s, b1), b1 - s * (b1 - b0)])
        return self.point(u, v)

    def interior_samples(self, n: int = 8) -> np.ndarray:
        g = (np.arange(n) + 0.5) / n
        uu, vv = np.meshgrid(g, g, indexing="ij")
        uu, vv = uu.ravel(), vv.ravel()
        if self.reference == "triangle":
            keep = uu + vv < 1
            return self.point(uu[keep], vv[keep])
        (a0, a1), (b0, b1) = self.reference_box()
        return self.point(a0 + uu * (a1 - a0), b0 + vv * (b1 - b0))

    def to_dict(self) -> dict:
        return {"type": self.kind, "params": _jsonable(self.params)}

    def translated(self, shift) -> "SurfacePatch":
        shift = _vec(shift)
        p = copy.deepcopy(self.params)
        for key in ("center", "a", "b", "c"):
            if key in p:
                p[key] = (_vec(p[key]) + shift).tolist()
        if self.kind == "graph":
            p["x0"] += shift[0]
            p["x1"] += shift[0]
            p["y0"] += shift[1]
            p["y1"] += shift[1]
            p["z0"] += shift[2]
        return SurfacePatch(self.kind, p)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass
class Edge:
    v: tuple[int, int]
    curve: Curve | None = None
    tag: str = INTERIOR

    @property
    def curved(self) -> bool:
        return self.curve is not None


@dataclass
class Face:
    edges: list[tuple[int, int]]  # (edge id, orientation)
    patch: SurfacePatch | None = None
    tag: str = INTERIOR

    @property
    def curved(self) -> bool:
        return self.patch is not None


@dataclass
class Cell:
    boundary: list[tuple[int, int]]  # (edge or face id, orientation)
    region: int = 1
    role: CellRole = CellRole.PLAIN


@dataclass
class Mesh:
    dim: int
    vertices: np.ndarray
    edges: list[Edge]
    faces: list[Face] = field(default_factory=list)
    cells: list[Cell] = field(default_factory=list)
    rho0: float = 0.05

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, self.dim)
        self._adjacency = None

    # -- topology helpers -------------------------------------------------
    def facet_entities(self):
        """Edges in 2D, faces in 3D."""
        return self.edges if self.dim == 2 else self.faces

    def adjacency(self) -> list[list[int]]:
        """Cells adjacent to each facet (edge in 2D, face in 3D), sorted by cell id."""
        if self._adjacency is None:
            adj = [[] for _ in self.facet_entities()]
            for cid, cell in enumerate(self.cells):
                for fid, _ in cell.boundary:
                    adj[fid].append(cid)
            self._adjacency = adj
        return self._adjacency

    def invalidate(self):
        self._adjacency = None

    def edge_loop_vertices(self, loop) -> list[int]:
        out = []
        for eid, s in loop:
            a, b = self.edges[eid].v
            out.append(a if s > 0 else b)
        return out

    def face_vertices(self, fid: int) -> list[int]:
        return self.edge_loop_vertices(self.faces[fid].edges)

    def cell_vertices(self, cid: int) -> list[int]:
        """Vertex ids of a cell in first-appearance order."""
        cell = self.cells[cid]
        if self.dim == 2:
            return self.edge_loop_vertices(cell.boundary)
        seen, out = set(), []
        for fid, _ in cell.boundary:
            for v in self.face_vertices(fid):
                if v not in seen:
                    seen.add(v)
                    out.append(v)
        return out

    def cell_edges(self, cid: int) -> list[int]:
        cell = self.cells[cid]
        if self.dim == 2:
            return [e for e, _ in cell.boundary]
        seen, out = set(), []
        for fid, _ in cell.boundary:
            for e, _ in self.faces[fid].edges:
                if e not in seen:
                    seen.add(e)
                    out.append(e)
        return out

    def curved_facets(self, cid: int) -> list[int]:
        ents = self.facet_entities()
        return [f for f, _ in self.cells[cid].boundary if ents[f].curved]

    def boundary_facet_tag(self, fid: int) -> str:
        return self.facet_entities()[fid].tag

    def copy(self) -> "Mesh":
        return copy.deepcopy(self)

    def counts(self) -> dict:
        return {"N_P": len(self.cells), "N_F": len(self.faces) if self.dim == 3 else 0,
                "N_E": len(self.edges), "N_V": len(self.vertices)}


# -- validation ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    entity: str
    ident: int
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.entity} {self.ident}: {self.message}"


def validate_mesh(mesh: Mesh, rho0: float | None = None, check_shape: bool = True) -> list[Violation]:
    """Check the mesh assumptions and return every violation found.

    The star-shapedness test is approximate: a cell passes when some candidate
    point ``c`` satisfies ``(x - c) . n(x) >= rho0 * h`` at every boundary
    sample ``x``; this implies star-shapedness with respect to the ball of
    radius ``rho0 * h`` around ``c``. The centroid is tried first, then a grid
    of candidates inside the bounding box.
    """
    rho0 = mesh.rho0 if rho0 is None else rho0
    out: list[Violation] = []
    ents = mesh.facet_entities()
    name = "edge" if mesh.dim == 2 else "face"
    adj = [[] for _ in ents]
    for cid, cell in enumerate(mesh.cells):
        curved = 0
        for fid, s in cell.boundary:
            if not 0 <= fid < len(ents):
                out.append(Violation("dangling", "cell", cid, f"unknown {name} {fid}"))
                continue
            adj[fid].append(cid)
            curved += ents[fid].curved
        if curved > 1:
            kind = "multiple curved edges" if mesh.dim == 2 else "multiple curved faces"
            out.append(Violation(kind, "cell", cid, f"{curved} curved {name}s"))
        if cell.role == CellRole.PLAIN and curved:
            out.append(Violation("role", "cell", cid, "plain cell with curved boundary"))
        out.extend(_closure_violations(mesh, cid))
    for fid, cells in enumerate(adj):
        ent = ents[fid]
        if len(cells) == 0:
            out.append(Violation("conformity", name, fid, "not referenced by any cell"))
        elif len(cells) > 2:
            out.append(Violation("conformity", name, fid, f"shared by {len(cells)} cells"))
        elif len(cells) == 2 and ent.tag != INTERIOR:
            out.append(Violation("conformity", name, fid, f"interior {name} tagged {ent.tag}"))
        elif len(cells) == 1 and ent.tag == INTERIOR:
            out.append(Violation("conformity", name, fid, f"boundary {name} tagged interior"))
        if ent.curved:
            roles = sorted(mesh.cells[c].role.value for c in cells)
            if len(cells) == 2 and roles != sorted([CellRole.MASTER.value, CellRole.SLAVE.value]):
                out.append(Violation("pairing", name, fid, f"curved interface roles {roles}"))
            if len(cells) == 1:
                want = {DIRICHLET: CellRole.DIRICHLET_CURVED, NEUMANN: CellRole.NEUMANN_CURVED}.get(ent.tag)
                if want is None or mesh.cells[cells[0]].role != want:
                    out.append(Violation("pairing", name, fid,
                                         f"curved boundary {name} tag {ent.tag} with role {mesh.cells[cells[0]].role.value}"))
    out.extend(_curve_endpoint_violations(mesh))
    if check_shape and not any(v.kind in ("dangling", "closure") for v in out):
        out.extend(_shape_violations(mesh, rho0))
    return out


def _closure_violations(mesh: Mesh, cid: int) -> list[Violation]:
    cell = mesh.cells[cid]
    if mesh.dim == 2:
        verts = []
        for eid, s in cell.boundary:
            if not 0 <= eid < len(mesh.edges):
                return []
            a, b = mesh.edges[eid].v
            verts.append((a, b) if s > 0 else (b, a))
        for i, (a, b) in enumerate(verts):
            if b != verts[(i + 1) % len(verts)][0]:
                return [Violation("closure", "cell", cid, "boundary loop is not closed")]
        return []
    count: dict[tuple[int, int], int] = {}
    for fid, s in cell.boundary:
        if not 0 <= fid < len(mesh.faces):
            return []
        for eid, es in mesh.faces[fid].edges:
            a, b = mesh.edges[eid].v
            if es * s < 0:
                a, b = b, a
            count[(a, b)] = count.get((a, b), 0) + 1
    for (a, b), c in count.items():
        if c != 1 or count.get((b, a), 0) != 1:
            return [Violation("closure", "cell", cid, "boundary surface is not closed and consistently oriented")]
    return []


def _curve_endpoint_violations(mesh: Mesh) -> list[Violation]:
    out = []
    for eid, e in enumerate(mesh.edges):
        if e.curve is None:
            continue
        a, b = mesh.vertices[e.v[0]], mesh.vertices[e.v[1]]
        ends = e.curve.point([e.curve.t0, e.curve.t1])
        tol = 1e-12 * max(np.linalg.norm(b - a), 1.0) + 1e-14
        if np.linalg.norm(ends[0] - a) > tol or np.linalg.norm(ends[1] - b) > tol:
            out.append(Violation("geometry", "edge", eid, "curve endpoints do not match edge vertices"))
    return out


def _shape_violations(mesh: Mesh, rho0: float) -> list[Violation]:
    from .quadrature import boundary_samples_with_normals, geometric_measures

    out = []
    for cid in range(len(mesh.cells)):
        view = cell_view(mesh, cid)
        try:
            _, centroid, h = geometric_measures(view)
        except ValueError as exc:
            out.append(Violation("geometry", "cell", cid, str(exc)))
            continue
        for eid in mesh.cell_edges(cid):
            a, b = mesh.vertices[list(mesh.edges[eid].v)]
            if np.linalg.norm(b - a) < rho0 * h:
                out.append(Violation("regularity", "edge", eid, f"shorter than rho0*h_E in cell {cid}"))
        pts, nrm = boundary_samples_with_normals(view)
        if not _has_kernel_ball(pts, nrm, centroid, rho0 * h, mesh.dim):
            out.append(Violation("regularity", "cell", cid, "not star-shaped with respect to a ball of radius rho0*h_E"))
    return out


def _has_kernel_ball(pts, nrm, centroid, radius, dim, grid=64) -> bool:
    def ok(c):
        return np.all(np.einsum("pj,pj->p", pts - c, nrm) >= radius)

    if ok(centroid):
        return True
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    g = grid if dim == 2 else min(grid, 24)
    axes = [np.linspace(lo[j], hi[j], g + 2)[1:-1] for j in range(dim)]
    cand = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    # (x - c).n >= r  <=>  x.n - r >= c.n  for every sample
    rhs = np.einsum("pj,pj->p", pts, nrm) - radius
    for chunk in np.array_split(cand, max(1, cand.shape[0] // 4096)):
        good = np.all(chunk @ nrm.T <= rhs[None, :], axis=1)
        if good.any():
            return True
    return False


# -- roles -----------------------------------------------------------------

def assign_roles(mesh: Mesh, inplace: bool = False) -> Mesh:
    """Master/slave/boundary roles assigned deterministically (on a copy unless ``inplace``)."""
    out = mesh if inplace else mesh.copy()
    ents = out.facet_entities()
    adj = [[] for _ in ents]
    for cid, cell in enumerate(out.cells):
        for fid, _ in cell.boundary:
            adj[fid].append(cid)
    for cell in out.cells:
        cell.role = CellRole.PLAIN
    for fid, cells in enumerate(adj):
        ent = ents[fid]
        if not ent.curved:
            continue
        if len(cells) == 2:
            if ent.tag != INTERIOR:
                raise MeshError(f"internal curved entity {fid} tagged {ent.tag}")
            lo, hi = sorted(cells)
            out.cells[lo].role = CellRole.MASTER
            out.cells[hi].role = CellRole.SLAVE
        elif len(cells) == 1:
            if ent.tag == DIRICHLET:
                out.cells[cells[0]].role = CellRole.DIRICHLET_CURVED
            elif ent.tag == NEUMANN:
                out.cells[cells[0]].role = CellRole.NEUMANN_CURVED
            else:
                raise MeshError(f"curved boundary entity {fid} has inconsistent tag {ent.tag!r}")
    out.invalidate()
    return out


def master_of(mesh: Mesh, cid: int) -> tuple[int, int]:
    """For a slave cell return (master cell id, shared curved facet id)."""
    adj = mesh.adjacency()
    for fid in mesh.curved_facets(cid):
        others = [c for c in adj[fid] if c != cid]
        if others:
            return others[0], fid
    raise MeshError(f"cell {cid} has no master neighbour")


# -- local geometric views -------------------------------------------------

class Segment:
    """A boundary piece of a 2D cell (or face loop) traversed from ``start`` to ``end``.

    ``point(s)``/``derivative(s)`` use a unit parameter ``s in [0, 1]`` along
    the traversal direction.
    """

    __slots__ = ("start", "end", "curve", "reverse", "edge_id", "sign", "tag", "transform")

    def __init__(self, start, end, curve=None, reverse=False, edge_id=-1, sign=1, tag=INTERIOR, transform=None):
        self.start = np.asarray(start, dtype=float)
        self.end = np.asarray(end, dtype=float)
        self.curve = curve
        self.reverse = reverse
        self.edge_id = edge_id
        self.sign = sign
        self.tag = tag
        self.transform = transform  # (origin, axes) projecting 3D curve points into a plane frame

    @property
    def curved(self) -> bool:
        return self.curve is not None

    def _t(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.reverse:
            s = 1.0 - s
        return self.curve.t0 + s * (self.curve.t1 - self.curve.t0)

    def point(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.curve is None:
            return self.start + s[:, None] * (self.end - self.start)
        x = self.curve.point(self._t(s))
        if self.transform is not None:
            origin, axes = self.transform
            x = (x - origin) @ axes.T
        return x

    def derivative(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.curve is None:
            return np.repeat((self.end - self.start)[None, :], s.size, axis=0)
        d = self.curve.derivative(self._t(s)) * (self.curve.t1 - self.curve.t0)
        if self.reverse:
            d = -d
        if self.transform is not None:
            d = d @ self.transform[1].T
        return d

    def length(self) -> float:
        if self.curve is None:
            return float(np.linalg.norm(self.end - self.start))
        from .quadrature import gauss_legendre
        x, w = gauss_legendre(24)
        return float(w @ np.linalg.norm(self.derivative(x), axis=1))


@dataclass
class PolygonView:
    """Geometry of a 2D cell (or of a flat face in its plane frame)."""

    segments: list[Segment]
    vertex_ids: list[int]
    ident: int = -1

    @property
    def vertices(self) -> np.ndarray:
        return np.array([s.start for s in self.segments])

    @property
    def dim(self) -> int:
        return 2


@dataclass
class FaceView:
    """A face of a 3D cell with its outward orientation in that cell."""

    face_id: int
    vertex_ids: list[int]
    points: np.ndarray  # loop vertices, 3D
    patch: SurfacePatch | None
    sign: int  # +1 if the loop normal points out of the cell
    loop_normal: np.ndarray  # unit normal of the loop (right-hand rule)
    edge_ids: list[tuple[int, int]]
    tag: str = INTERIOR

    @property
    def curved(self) -> bool:
        return self.patch is not None

    @property
    def outward_normal(self) -> np.ndarray:
        return self.sign * self.loop_normal


@dataclass
class PolyhedronView:
    faces: list[FaceView]
    vertex_ids: list[int]
    vertices: np.ndarray
    ident: int = -1

    @property
    def dim(self) -> int:
        return 3


def newell_normal(points: np.ndarray) -> np.ndarray:
    p = np.asarray(points)
    q = np.concatenate((p[1:], p[:1]))
    d, s = p - q, p + q
    n = np.array([d[:, 1] @ s[:, 2], d[:, 2] @ s[:, 0], d[:, 0] @ s[:, 1]])
    norm = math.sqrt(n @ n)
    if norm == 0:
        raise MeshError("degenerate face loop")
    return n / norm


def polygon_view(mesh: Mesh, cid: int) -> PolygonView:
    cell = mesh.cells[cid]
    segs = []
    vids = []
    for eid, s in cell.boundary:
        e = mesh.edges[eid]
        a, b = (e.v[0], e.v[1]) if s > 0 else (e.v[1], e.v[0])
        vids.append(a)
        segs.append(Segment(mesh.vertices[a], mesh.vertices[b], e.curve, s < 0, eid, s, e.tag))
    return PolygonView(segs, vids, cid)


def face_view(mesh: Mesh, fid: int, sign: int = 1) -> FaceView:
    f = mesh.faces[fid]
    vids = mesh.face_vertices(fid)
    pts = mesh.vertices[vids]
    return FaceView(fid, vids, pts, f.patch, sign, newell_normal(pts), list(f.edges), f.tag)


def polyhedron_view(mesh: Mesh, cid: int) -> PolyhedronView:
    cell = mesh.cells[cid]
    faces = [face_view(mesh, fid, s) for fid, s in cell.boundary]
    vids = mesh.cell_vertices(cid)
    return PolyhedronView(faces, vids, mesh.vertices[vids], cid)


def cell_view(mesh: Mesh, cid: int):
    return polygon_view(mesh, cid) if mesh.dim == 2 else polyhedron_view(mesh, cid)


def face_frame(mesh: Mesh, fid: int):
    """Plane frame of a flat face: (origin placeholder, axes 2x3, unit normal).

    The first axis follows the lowest-index edge of the face, the second is
    ``normal x first``, so the face loop is counterclockwise in the frame.
    """
    f = mesh.faces[fid]
    vids = mesh.face_vertices(fid)
    pts = mesh.vertices[vids]
    n = newell_normal(pts)
    eid = min(e for e, _ in f.edges)
    a, b = mesh.vertices[list(mesh.edges[eid].v)]
    e1 = b - a
    e1 = e1 - n * (e1 @ n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return np.stack([e1, e2]), n


def face_polygon_view(mesh: Mesh, fid: int, origin: np.ndarray, axes: np.ndarray) -> PolygonView:
    """A flat face mapped isometrically into its plane frame."""
    f = mesh.faces[fid]
    segs, vids = [], []
    for eid, s in f.edges:
        e = mesh.edges[eid]
        a, b = (e.v[0], e.v[1]) if s > 0 else (e.v[1], e.v[0])
        vids.append(a)
        pa = (mesh.vertices[a] - origin) @ axes.T
        pb = (mesh.vertices[b] - origin) @ axes.T
        segs.append(Segment(pa, pb, e.curve, s < 0, eid, s, e.tag,
                            transform=(origin, axes) if e.curve is not None else None))
    return PolygonView(segs, vids, fid)


def check_planar(mesh: Mesh, fid: int, tol: float = 1e-10) -> None:
    pts = mesh.vertices[mesh.face_vertices(fid)]
    n = newell_normal(pts)
    dev = np.abs((pts - pts.mean(axis=0)) @ n)
    scale = np.max(np.linalg.norm(pts - pts.mean(axis=0), axis=1))
    if np.max(dev) > tol * max(scale, 1e-300):
        raise MeshError(f"face {fid} is not planar (deviation {np.max(dev):.3e})")


# -- statistics ------------------------------------------------------------

def mesh_statistics(mesh: Mesh, diameters=None) -> dict:
    """Counts and sizes in the layout of the convergence tables.

    ``h`` is the largest cell diameter, ``h_min`` the smallest distance between
    two vertices of one cell, ``h_bar`` the average cell diameter.
    """
    if diameters is None:
        from .quadrature import geometric_measures
        diameters = [geometric_measures(cell_view(mesh, c))[2] for c in range(len(mesh.cells))]
    diameters = np.asarray(diameters)
    hmin = np.inf
    for cid in range(len(mesh.cells)):
        p = mesh.vertices[mesh.cell_vertices(cid)]
        d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
        d[np.diag_indices_from(d)] = np.inf
        hmin = min(hmin, d.min())
    stats = mesh.counts()
    stats.update(h=float(diameters.max()), h_min=float(hmin), h_bar=float(diameters.mean()))
    return stats
