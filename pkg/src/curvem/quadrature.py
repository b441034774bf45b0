"""Quadrature on straight and curved edges, faces and cells.

Monomial moments use the homogeneous-function identity: for ``p`` homogeneous
of degree ``s`` about ``c``, ``div(p (x - c)) = (s + d) p`` so
``int_E p = (s + d)^-1 int_dE p (x - c).n``. Curved pieces are integrated
with Gauss-Legendre in their parameter.
"""

from __future__ import annotations

from functools import lru_cache
from math import ceil

import numpy as np

from .geometry import FaceView, PolygonView, PolyhedronView, Segment
from .polybasis import ScaledMonomialBasis

DEFAULT_CURVED_POINTS = 16


def curved_points_for(k: int) -> int:
    """Default Gauss points per direction on curved entities for order ``k``."""
    return 3 * k + 4


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    """``n``-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_lobatto(k: int):
    """``(k+1)``-point Gauss-Lobatto rule on [0, 1] (exact to degree ``2k - 1``)."""
    if k < 1:
        raise ValueError("Gauss-Lobatto needs k >= 1")
    if k == 1:
        return np.array([0.0, 1.0]), np.array([0.5, 0.5])
    leg = np.polynomial.legendre.Legendre.basis(k)
    inner = np.sort(leg.deriv().roots().real)
    x = np.concatenate([[-1.0], inner, [1.0]])
    w = 2.0 / (k * (k + 1) * leg(x) ** 2)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi_s1(n: int):
    """Gauss rule on [0, 1] for the weight ``s`` (nodes and weights)."""
    import scipy.special
    x, w = scipy.special.roots_jacobi(n, 0.0, 1.0)
    return 0.5 * (x + 1.0), 0.25 * w


@lru_cache(maxsize=None)
def gauss_jacobi_s2(n: int):
    """Gauss rule on [0, 1] for the weight ``s**2``."""
    import scipy.special
    x, w = scipy.special.roots_jacobi(n, 0.0, 2.0)
    return 0.5 * (x + 1.0), 0.125 * w


def points_for_degree(order: int) -> int:
    return max(1, ceil((order + 1) / 2))


@lru_cache(maxsize=None)
def triangle_rule(order: int):
    """Collapsed-coordinate rule on the unit triangle, exact to ``order``.

    Returns barycentric-style coordinates ``(u, v)`` with ``u, v >= 0``,
    ``u + v <= 1`` and positive weights summing to 1/2.
    """
    n = points_for_degree(order)
    s, ws = gauss_jacobi_s1(points_for_degree(order + 1))
    t, wt = gauss_legendre(n)
    # u = s (1 - t), v = s t, jacobian s
    u = (s[:, None] * (1 - t[None, :])).ravel()
    v = (s[:, None] * t[None, :]).ravel()
    w = (ws[:, None] * wt[None, :]).ravel()
    return u, v, w


# -- edges -------------------------------------------------------------------

def edge_rule(seg: Segment, order: int, n_curved: int | None = None):
    """Weighted points on a segment: (points, weights, unit outward normals).

    Straight: Gauss-Legendre exact to ``order``. Curved: Gauss-Legendre in the
    parameter with the arclength factor. Normals are ``(t_y, -t_x)``, outward
    for a counterclockwise traversal (2D only; ``None`` otherwise).
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if seg.curved:
        n = max(points_for_degree(order), n_curved or 0)
    else:
        n = points_for_degree(order)
    s, w = gauss_legendre(n)
    x = seg.point(s)
    d = seg.derivative(s)
    speed = np.linalg.norm(d, axis=1)
    if np.any(speed <= 0):
        raise ValueError("degenerate curve parametrization")
    normals = None
    if x.shape[1] == 2:
        normals = np.stack([d[:, 1], -d[:, 0]], axis=1) / speed[:, None]
    return x, w * speed, normals


def gauss_lobatto_interior_nodes(seg: Segment, k: int) -> np.ndarray:
    """The ``k-1`` interior Gauss-Lobatto nodes of a straight segment."""
    if seg.curved:
        raise ValueError("no nodal degrees of freedom on curved edges")
    if k < 2:
        return np.zeros((0, seg.start.size))
    s, _ = gauss_lobatto(k)
    return seg.point(s[1:-1])


# -- 2D cells -----------------------------------------------------------------

def boundary_rule_2d(view: PolygonView, order: int, n_curved: int | None = None):
    pts, wts, nrm = [], [], []
    for seg in view.segments:
        x, w, n = edge_rule(seg, order, n_curved)
        pts.append(x)
        wts.append(w)
        nrm.append(n)
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(nrm)


def monomial_moments_2d(view: PolygonView, basis: ScaledMonomialBasis, k_max: int | None = None,
                        n_curved: int | None = None) -> np.ndarray:
    """Integrals over the cell of every member of degree <= ``k_max``."""
    k_max = basis.degree if k_max is None else k_max
    b = basis.with_degree(k_max)
    _check_closed_2d(view)
    x, w, n = boundary_rule_2d(view, k_max + 1, n_curved)
    radial = np.einsum("pj,pj->p", x - b.centroid, n)
    vals = b.evaluate(x)
    return (w * radial) @ vals / (b.degrees + 2.0)


def _check_closed_2d(view: PolygonView):
    segs = view.segments
    scale = max(np.ptp(np.array([s.start for s in segs]), axis=0).max(), 1e-300)
    for i, seg in enumerate(segs):
        nxt = segs[(i + 1) % len(segs)]
        if np.linalg.norm(seg.end - nxt.start) > 1e-10 * scale:
            raise ValueError("open boundary loop")


def sector_rule(centre, seg: Segment, order: int, n_curved: int | None = None):
    """Rule on the region swept by segments from ``centre`` to each point of ``seg``."""
    nt = max(points_for_degree(order), n_curved or 0) if seg.curved else points_for_degree(order)
    t, wt = gauss_legendre(nt)
    s, ws = gauss_jacobi_s1(points_for_degree(order + 1))
    g = seg.point(t)
    dg = seg.derivative(t)
    rel = g - centre
    jac = rel[:, 0] * dg[:, 1] - rel[:, 1] * dg[:, 0]
    pts = centre + s[:, None, None] * rel[None, :, :]
    w = ws[:, None] * (wt * jac)[None, :]
    return pts.reshape(-1, 2), w.ravel()


def cell_rule_general(view: PolygonView, order: int, n_curved: int | None = None, centre=None):
    """Positive-weight rule on a 2D cell from a fan of sectors around the centroid."""
    if centre is None:
        centre = geometric_measures(view, n_curved)[1]
    pts, wts = [], []
    for seg in view.segments:
        x, w = sector_rule(centre, seg, order, n_curved)
        if np.any(w <= 0):
            raise ValueError("centroid outside the kernel: cell is not star-shaped about it")
        pts.append(x)
        wts.append(w)
    return np.concatenate(pts), np.concatenate(wts)


# -- faces --------------------------------------------------------------------

def flat_face_rule(face: FaceView, order: int, centre=None):
    """Fan rule on a flat polygonal face (3D points, weights)."""
    P = face.points
    c = P.mean(axis=0) if centre is None else centre
    u, v, w = triangle_rule(order)
    pts, wts = [], []
    m = len(P)
    for i in range(m):
        a, b = P[i], P[(i + 1) % m]
        area2 = np.linalg.norm(np.cross(a - c, b - c))
        pts.append(c + u[:, None] * (a - c) + v[:, None] * (b - c))
        wts.append(w * area2)
    return np.concatenate(pts), np.concatenate(wts)


def patch_rule(patch, n: int):
    """Tensor Gauss rule on a patch's reference domain: (points, weights, unit normals of sigma_u x sigma_v)."""
    if patch.reference == "triangle":
        s, ws = gauss_jacobi_s1(n)
        t, wt = gauss_legendre(n)
        u = (s[:, None] * (1 - t[None, :])).ravel()
        v = (s[:, None] * t[None, :]).ravel()
        w = (ws[:, None] * wt[None, :]).ravel()
    else:
        (a0, a1), (b0, b1) = patch.reference_box()
        x, wx = gauss_legendre(n)
        u = np.repeat(a0 + (a1 - a0) * x, n)
        v = np.tile(b0 + (b1 - b0) * x, n)
        w = np.outer(wx, wx).ravel() * (a1 - a0) * (b1 - b0)
    pts = patch.point(u, v)
    du, dv = patch.partials(u, v)
    cr = np.cross(du, dv)
    area = np.linalg.norm(cr, axis=1)
    if np.any(area <= 1e-300):
        raise ValueError("degenerate surface normal")
    return pts, w * area, cr / area[:, None]


def surface_rule(face: FaceView, n: int):
    """Rule on a curved face with unit normals pointing out of the owning cell."""
    pts, w, nrm = patch_rule(face.patch, n)
    # align the patch orientation with the face loop normal, then with the cell
    mean_n = (w @ nrm)
    if mean_n @ face.loop_normal < 0:
        nrm = -nrm
    return pts, w, face.sign * nrm


def face_rule(face: FaceView, order: int, n_curved: int | None = None):
    """(points, weights, outward normals) for a flat or curved face."""
    if face.curved:
        return surface_rule(face, max(points_for_degree(order), n_curved or 0))
    x, w = flat_face_rule(face, order)
    return x, w, np.repeat(face.outward_normal[None, :], len(w), axis=0)


# -- 3D cells -----------------------------------------------------------------

def monomial_moments_3d(view: PolyhedronView, basis: ScaledMonomialBasis, k_max: int | None = None,
                        n_curved: int | None = None) -> np.ndarray:
    """Integrals over the cell of every member of degree <= ``k_max``."""
    k_max = basis.degree if k_max is None else k_max
    b = basis.with_degree(k_max)
    _check_closed_3d(view)
    acc = np.zeros(len(b))
    for face in view.faces:
        x, w, n = face_rule(face, k_max, n_curved)
        radial = np.einsum("pj,pj->p", x - b.centroid, n)
        acc += (w * radial) @ b.evaluate(x)
    return acc / (b.degrees + 3.0)


def _check_closed_3d(view: PolyhedronView):
    total = np.zeros(3)
    area = 0.0
    for f in view.faces:
        if f.curved:
            return
        x, w = flat_face_rule(f, 1)
        total += w.sum() * f.outward_normal
        area += w.sum()
    if np.linalg.norm(total) > 1e-10 * max(area, 1e-300):
        raise ValueError("non-closed boundary surface")


def cell_rule_3d(view: PolyhedronView, order: int, n_curved: int | None = None, centre=None):
    """Positive-weight rule on a 3D cell from cones over its faces."""
    if centre is None:
        centre = geometric_measures(view, n_curved)[1]
    s, ws = gauss_jacobi_s2(points_for_degree(order + 2))
    pts, wts = [], []
    for face in view.faces:
        y, wy, ny = face_rule(face, order, n_curved)
        height = np.einsum("pj,pj->p", y - centre, ny)
        if np.any(height <= 0):
            raise ValueError("centroid outside the kernel: cell is not star-shaped about it")
        pts.append((centre + s[:, None, None] * (y - centre)[None, :, :]).reshape(-1, 3))
        wts.append((ws[:, None] * (wy * height)[None, :]).ravel() / 1.0)
    return np.concatenate(pts), np.concatenate(wts)


def cell_rule(view, order: int, n_curved: int | None = None, centre=None):
    if isinstance(view, PolyhedronView):
        return cell_rule_3d(view, order, n_curved, centre)
    return cell_rule_general(view, order, n_curved, centre)


def monomial_moments(view, basis, k_max=None, n_curved=None):
    if isinstance(view, PolyhedronView):
        return monomial_moments_3d(view, basis, k_max, n_curved)
    return monomial_moments_2d(view, basis, k_max, n_curved)


# -- measures -----------------------------------------------------------------

def boundary_samples(view) -> np.ndarray:
    """Vertices plus 16 samples per curved edge or 64 per curved face."""
    if isinstance(view, PolyhedronView):
        pts = [view.vertices]
        for f in view.faces:
            if f.curved:
                pts.append(f.patch.boundary_samples(64))
                pts.append(f.patch.interior_samples(8))
        return np.concatenate(pts)
    pts = [view.vertices]
    s = np.linspace(0, 1, 18)[1:-1]
    for seg in view.segments:
        if seg.curved:
            pts.append(seg.point(s))
    return np.concatenate(pts)


def boundary_samples_with_normals(view, n: int = 16):
    """Boundary sample points with unit outward normals (for shape checks)."""
    if isinstance(view, PolyhedronView):
        pts, nrm = [], []
        for f in view.faces:
            x, _, nn = face_rule(f, 3, n_curved=8)
            pts.append(x)
            nrm.append(nn)
            pts.append(f.points)
            nrm.append(np.repeat(f.outward_normal[None, :], len(f.points), 0) if not f.curved
                       else _nearest_normals(f.points, x, nn))
        return np.concatenate(pts), np.concatenate(nrm)
    pts, nrm = [], []
    s = (np.arange(n) + 0.5) / n
    s = np.concatenate([[0.0], s, [1.0]])
    for seg in view.segments:
        x = seg.point(s)
        d = seg.derivative(s)
        nn = np.stack([d[:, 1], -d[:, 0]], axis=1)
        pts.append(x)
        nrm.append(nn / np.linalg.norm(nn, axis=1)[:, None])
    return np.concatenate(pts), np.concatenate(nrm)


def _nearest_normals(targets, pts, nrm):
    idx = np.argmin(np.linalg.norm(targets[:, None, :] - pts[None, :, :], axis=-1), axis=1)
    return nrm[idx]


def _diameter(points: np.ndarray) -> float:
    d = points[:, None, :] - points[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))


def geometric_measures(view, n_curved: int | None = None):
    """(measure, centroid, diameter) of a 2D or 3D cell.

    Measure and centroid come from first moments about the vertex average by
    the divergence theorem. The diameter is the largest distance between
    boundary samples.
    """
    n_curved = n_curved or DEFAULT_CURVED_POINTS
    dim = view.dim
    samples = boundary_samples(view)
    h = _diameter(samples)
    c = view.vertices.mean(axis=0)
    b = ScaledMonomialBasis(dim, 1, c, h)
    m = monomial_moments(view, b, 1, n_curved)
    measure = m[0]
    if not measure > 0:
        raise ValueError("cell has non-positive measure")
    return float(measure), c + h * m[1:] / measure, h
