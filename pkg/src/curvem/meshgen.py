"""Structured curved meshes for the test campaigns.

- ``generate_disk_interface_mesh``: polar rings on a disk with a circular
  material interface; the interface and the outer boundary are circular arcs.
- ``generate_bubble_mesh``: the unit cube cut into ``n^3`` subcubes, each split
  by a bulged plane into a corner tetrahedron and the remaining polyhedron.
- ``generate_bulged_cube_mesh``: hexahedra whose top faces are curved graphs.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import (DIRICHLET, INTERIOR, NEUMANN, Cell, Curve, Edge, Face, Mesh, MeshError, SurfacePatch,
                       assign_roles, newell_normal)


class _EdgeBook:
    """Edges deduplicated by their vertex pair."""

    def __init__(self):
        self.edges: list[Edge] = []
        self.index: dict = {}

    def get(self, a: int, b: int, curve=None, tag=INTERIOR) -> tuple[int, int]:
        """(edge id, orientation) for the traversal a -> b; creates the edge a -> b if new."""
        key = (min(a, b), max(a, b))
        if key in self.index:
            eid = self.index[key]
            return eid, (1 if self.edges[eid].v == (a, b) else -1)
        eid = len(self.edges)
        self.index[key] = eid
        self.edges.append(Edge((a, b), curve, tag))
        return eid, 1


# -- 2D disk with a circular interface ------------------------------------------------

def _ring_counts(radii, i_interface, n_angular):
    """Vertex count per circle: powers-of-two multiples of ``n_angular``.

    Each circle aims at arcs about as long as the radial spacing; neighbouring
    circles differ by at most a factor two and every curved circle is the
    coarser side of its rings, so no cell gets two curved edges.
    """
    nc = len(radii)
    dr = radii[0]
    want = [math.log2(max(2 * math.pi * r / dr, 1e-300) / n_angular) for r in radii]
    p = [0] * nc
    p[i_interface] = 0
    for c in range(i_interface - 1, -1, -1):
        lo = p[c + 1] - 1
        p[c] = 0 if c == i_interface - 1 else max(round(want[c]), lo)
        p[c] = min(p[c], p[c + 1] + 1)
    for c in range(i_interface + 1, nc):
        p[c] = max(p[c - 1], min(round(want[c]), p[c - 1] + 1))
    p[-1] = p[-2]
    counts = []
    for pc in p:
        if pc >= 0:
            counts.append(n_angular * 2**pc)
        else:
            d = 2 ** (-pc)
            while d > 1 and (n_angular % d or n_angular // d < 4):
                d //= 2
            counts.append(n_angular // d)
    return counts


def _refine_rings(radii, counts, n_radial, m):
    """Split each ring into ``m`` rings; new circles take the finer count of their ring."""
    r_new, c_new = [], []
    inner_r = 0.0
    for c, (r, nc) in enumerate(zip(radii, counts)):
        for j in range(1, m + 1):
            r_new.append(inner_r + (r - inner_r) * j / m)
            if c == 0 and j < m - 1:
                # centre fan: counts proportional to radius in powers of two
                c_new.append(nc * 2 ** math.ceil(math.log2(j)))
            else:
                c_new.append(nc * m)
        inner_r = r
    return r_new, c_new, n_radial * m


def generate_disk_interface_mesh(n_radial: int, n_angular: int, R_outer: float = 2.0, r_interface: float = 0.5,
                                 perturbation: float = 0.0, seed: int = 0, refinement: int = 0) -> Mesh:
    """Polar mesh of the disk ``r < R_outer`` with a curved interface at ``r_interface``.

    ``n_radial`` rings lie inside the interface (the innermost one is a fan of
    curved or straight sectors around the centre); the annulus gets rings of
    about the same width. ``n_angular`` is the vertex count on the interface.
    Boundary arcs with ``y > 0`` are Dirichlet, the others Neumann. Region 1
    is inside the interface, region 2 outside.

    ``refinement = L`` splits every ring into ``2^L`` rings and multiplies the
    vertex counts by ``2^L``, so successive levels form a nested-like family
    with the same layout. Inside the centre fan the counts halve inward.
    """
    if n_radial < 1 or n_angular < 8 or n_angular % 2:
        raise MeshError("need n_radial >= 1 and an even n_angular >= 8")
    if not 0 < r_interface < R_outer:
        raise MeshError("need 0 < r_interface < R_outer")
    if perturbation < 0 or perturbation >= 0.25:
        raise MeshError("perturbation must lie in [0, 0.25)")
    dr = r_interface / n_radial
    n_out = max(2, round((R_outer - r_interface) / dr))
    radii = [dr * (j + 1) for j in range(n_radial)]
    radii[-1] = r_interface
    radii += [r_interface + (R_outer - r_interface) * (i + 1) / n_out for i in range(n_out)]
    counts = _ring_counts(radii, n_radial - 1, n_angular)
    if refinement < 0:
        raise MeshError("refinement must be >= 0")
    if refinement:
        radii, counts, n_radial = _refine_rings(radii, counts, n_radial, 2**refinement)
    i_int = n_radial - 1
    i_bnd = len(radii) - 1
    rng = np.random.default_rng(seed)

    verts = [np.zeros(2)]
    circle_ids, circle_theta = [], []
    for c, (r, nc) in enumerate(zip(radii, counts)):
        theta = 2 * np.pi * np.arange(nc) / nc
        if perturbation > 0:
            jitter = perturbation * (2 * np.pi / nc) * rng.uniform(-1, 1, nc)
            if c == i_bnd:
                jitter[[0, nc // 2]] = 0.0  # keep the Dirichlet/Neumann split points
            theta = theta + jitter
        ids = list(range(len(verts), len(verts) + nc))
        verts.extend(np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1))
        circle_ids.append(ids)
        circle_theta.append(theta)

    book = _EdgeBook()
    # circle edges in ascending angle
    for c, (ids, theta) in enumerate(zip(circle_ids, circle_theta)):
        nc = len(ids)
        for i in range(nc):
            a, b = ids[i], ids[(i + 1) % nc]
            t0, t1 = theta[i], theta[(i + 1) % nc] + (2 * np.pi if i == nc - 1 else 0.0)
            curve, tag = None, INTERIOR
            if c in (i_int, i_bnd):
                curve = Curve("circular_arc", {"center": [0.0, 0.0], "radius": radii[c]}, t0, t1)
            if c == i_bnd:
                tag = DIRICHLET if math.sin(0.5 * (t0 + t1)) > 0 else NEUMANN
            book.get(a, b, curve, tag)

    cells = []
    # centre fan
    ids = circle_ids[0]
    for i in range(len(ids)):
        a, b = ids[i], ids[(i + 1) % len(ids)]
        cells.append(Cell([book.get(0, a), book.get(a, b), book.get(b, 0)], region=1))
    # rings between circle c-1 and c
    for c in range(1, len(radii)):
        inner, outer = circle_ids[c - 1], circle_ids[c]
        m = min(len(inner), len(outer))
        si, so = len(inner) // m, len(outer) // m
        region = 1 if c <= i_int else 2
        for i in range(m):
            loop = [book.get(inner[i * si], outer[i * so])]
            for j in range(so):
                loop.append(book.get(outer[(i * so + j) % len(outer)], outer[(i * so + j + 1) % len(outer)]))
            loop.append(book.get(outer[((i + 1) * so) % len(outer)], inner[((i + 1) * si) % len(inner)]))
            for j in range(si, 0, -1):
                loop.append(book.get(inner[(i * si + j) % len(inner)], inner[(i * si + j - 1) % len(inner)]))
            cells.append(Cell(loop, region=region))
    mesh = Mesh(2, np.array(verts), book.edges, [], cells)
    return assign_roles(mesh, inplace=True)


# -- 3D helpers -----------------------------------------------------------------------

class _FaceBook:
    def __init__(self, edges: _EdgeBook):
        self.edges = edges
        self.faces: list[Face] = []
        self.index: dict = {}

    def get(self, loop: list[int], patch=None, tag=INTERIOR) -> int:
        key = tuple(sorted(loop))
        if key in self.index:
            return self.index[key]
        fid = len(self.faces)
        self.index[key] = fid
        n = len(loop)
        self.faces.append(Face([self.edges.get(loop[i], loop[(i + 1) % n]) for i in range(n)], patch, tag))
        return fid


def _orient(mesh_vertices, face_book, fids, centre):
    """Signs making each face's loop normal point away from ``centre``."""
    out = []
    for fid in fids:
        f = face_book.faces[fid]
        vids = [face_book.edges.edges[e].v[0] if s > 0 else face_book.edges.edges[e].v[1] for e, s in f.edges]
        pts = mesh_vertices[vids]
        n = newell_normal(pts)
        out.append((fid, 1 if n @ (pts.mean(axis=0) - centre) > 0 else -1))
    return out


def _grid_vertices(n: int) -> np.ndarray:
    g = np.linspace(0.0, 1.0, n + 1)
    z, y, x = np.meshgrid(g, g, g, indexing="ij")
    return np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)


def _vid(n: int, i: int, j: int, k: int) -> int:
    return i + (n + 1) * (j + (n + 1) * k)


def _is_outer(pts: np.ndarray) -> bool:
    return bool(np.any(np.all(pts < 1e-12, axis=0) | np.all(pts > 1.0 - 1e-12, axis=0)))


# -- bubble cube ----------------------------------------------------------------------

BUBBLE_CONSTANT = 0.1


def _square_corners(n, axis, i, j, k):
    """Corners (c00, c10, c01, c11) of the grid square normal to ``axis`` at lattice point (i, j, k)."""
    base = [i, j, k]
    u, v = [a for a in range(3) if a != axis]

    def at(du, dv):
        p = list(base)
        p[u] += du
        p[v] += dv
        return _vid(n, *p)

    return at(0, 0), at(1, 0), at(0, 1), at(1, 1)


def generate_bubble_mesh(n: int, beta: int = 1, constant: float = BUBBLE_CONSTANT) -> Mesh:
    """Unit cube, ``n^3`` subcubes, each cut by a bulged corner plane into two cells.

    The plane through the three neighbours of a subcube's lowest corner is
    lifted by a cubic bubble of tip height ``constant * l^beta`` (``l = 1/n``)
    along its unit normal, away from the corner. Every grid square is split by
    the diagonal parallel to the plane's edges; the boundary is Dirichlet.
    """
    if n < 1:
        raise MeshError("n must be >= 1")
    if beta not in (1, 2):
        raise MeshError("beta must be 1 or 2")
    X = _grid_vertices(n)
    eb = _EdgeBook()
    fb = _FaceBook(eb)
    l = 1.0 / n
    normal = (np.ones(3) / math.sqrt(3.0)).tolist()
    amp = constant * l**beta

    def tri(axis, i, j, k, which):
        c00, c10, c01, c11 = _square_corners(n, axis, i, j, k)
        loop = [c00, c10, c01] if which == 0 else [c10, c11, c01]
        tag = DIRICHLET if _is_outer(X[loop]) else INTERIOR
        return fb.get(loop, tag=tag)

    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                p0 = _vid(n, i, j, k)
                a, b, c = _vid(n, i + 1, j, k), _vid(n, i, j + 1, k), _vid(n, i, j, k + 1)
                patch = SurfacePatch("bubble_triangle", {"a": X[a].tolist(), "b": X[b].tolist(), "c": X[c].tolist(),
                                                         "amplitude": amp, "normal": normal})
                sigma = fb.get([a, b, c], patch=patch)
                near = [tri(ax, i, j, k, 0) for ax in range(3)]
                near_rest = [tri(ax, i, j, k, 1) for ax in range(3)]
                far = []
                for ax in range(3):
                    q = [i, j, k]
                    q[ax] += 1
                    far += [tri(ax, *q, 0), tri(ax, *q, 1)]
                corner = X[p0]
                tet_centre = corner + 0.25 * l * np.ones(3)
                rest_centre = corner + 0.6 * l * np.ones(3)
                cells.append(Cell(_orient(X, fb, near + [sigma], tet_centre)))
                cells.append(Cell(_orient(X, fb, near_rest + far + [sigma], rest_centre)))
    mesh = Mesh(3, X, eb.edges, fb.faces, cells)
    return assign_roles(mesh, inplace=True)


# -- bulged cube -----------------------------------------------------------------------

def generate_bulged_cube_mesh(n: int, amplitude: float | None = None, top_tag: str = NEUMANN) -> Mesh:
    """Unit cube of ``n^3`` hexahedra whose top faces bulge to ``z = 1 + amplitude * b(x, y)``.

    ``b`` is the product bubble ``16 u(1-u) v(1-v)`` on each top face; the top
    is tagged ``top_tag``, the rest of the boundary Dirichlet. The default
    amplitude is ``0.1 / n``.
    """
    if n < 1:
        raise MeshError("n must be >= 1")
    amplitude = 0.1 / n if amplitude is None else float(amplitude)
    if amplitude < 0:
        raise MeshError("amplitude must be >= 0")
    X = _grid_vertices(n)
    eb = _EdgeBook()
    fb = _FaceBook(eb)
    l = 1.0 / n
    cells = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                fids = []
                for ax in range(3):
                    for off in (0, 1):
                        q = [i, j, k]
                        q[ax] += off
                        c00, c10, c01, c11 = _square_corners(n, ax, *q)
                        loop = [c00, c10, c11, c01]
                        outer = _is_outer(X[loop])
                        patch = None
                        tag = INTERIOR
                        if outer:
                            tag = DIRICHLET
                            if ax == 2 and off == 1 and k == n - 1:
                                tag = top_tag
                                if amplitude > 0:
                                    x0, y0 = X[c00][:2]
                                    patch = SurfacePatch("graph", {"x0": float(x0), "x1": float(x0 + l),
                                                                   "y0": float(y0), "y1": float(y0 + l),
                                                                   "z0": 1.0, "amplitude": amplitude})
                        fids.append(fb.get(loop, patch=patch, tag=tag))
                centre = X[_vid(n, i, j, k)] + 0.5 * l
                cells.append(Cell(_orient(X, fb, fids, centre)))
    mesh = Mesh(3, X, eb.edges, fb.faces, cells)
    return assign_roles(mesh, inplace=True)
