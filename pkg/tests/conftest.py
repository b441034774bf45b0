"""Shared builders for randomized cells and polynomial data."""

from __future__ import annotations

import math
import sys

import numpy as np
import pytest
import scipy.integrate

from curvem.geometry import Curve, Mesh, PolygonView, Segment, SurfacePatch, assign_roles, polyhedron_view
from curvem.meshgen import generate_bubble_mesh, generate_bulged_cube_mesh
from curvem.polybasis import ScaledMonomialBasis
from curvem.quadrature import cell_rule, geometric_measures


class GlobalPolynomial:
    """Random polynomial of degree ``k`` in a monomial basis centred at ``origin``."""

    def __init__(self, dim: int, k: int, rng, origin=None, scale: float = 1.0):
        origin = np.zeros(dim) if origin is None else np.asarray(origin, dtype=float)
        self.basis = ScaledMonomialBasis(dim, k, origin, scale)
        self.coeffs = rng.uniform(-1.0, 1.0, len(self.basis))

    def __call__(self, X, *_):
        return self.basis.evaluate(np.asarray(X)) @ self.coeffs

    def grad(self, X, *_):
        return np.einsum("pbj,b->pj", self.basis.gradient(np.asarray(X)), self.coeffs)


class CircleBubble:
    """``(R^2 - |x - c|^2) * p`` which vanishes on the circle of radius ``R`` about ``c``."""

    def __init__(self, centre, radius, factor: GlobalPolynomial):
        self.centre, self.radius, self.factor = np.asarray(centre), radius, factor

    def __call__(self, X, *_):
        X = np.asarray(X)
        return (self.radius**2 - np.sum((X - self.centre) ** 2, axis=1)) * self.factor(X)

    def grad(self, X, *_):
        X = np.asarray(X)
        bump = self.radius**2 - np.sum((X - self.centre) ** 2, axis=1)
        return bump[:, None] * self.factor.grad(X) - 2 * (X - self.centre) * self.factor(X)[:, None]


def fit_coefficients(basis: ScaledMonomialBasis, func, rng=None) -> np.ndarray:
    """Coefficients of a polynomial ``func`` (degree <= basis degree) by least squares at random points."""
    rng = np.random.default_rng(0) if rng is None else rng
    pts = basis.centroid + basis.diameter * rng.uniform(-0.6, 0.6, (4 * len(basis) + 10, basis.dim))
    A = basis.evaluate(pts)
    return np.linalg.lstsq(A, func(pts), rcond=None)[0]


def gradient_coefficients(basis: ScaledMonomialBasis, coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of each partial derivative over the degree ``k-1`` basis, shape (dim, n_{k-1})."""
    return np.stack([Dj.T @ coeffs for Dj in basis.derivative_matrices()])


def column_values(space, func, master=None) -> np.ndarray:
    """Values of every local column (own dofs, then coupled master dofs) for a polynomial ``func``."""
    x = np.zeros(space.ncols)
    x[:space.n_own] = space.D[:space.n_own] @ fit_coefficients(space.basis, func)
    if space.ncols > space.n_own:
        xm = master.D[:master.n_own] @ fit_coefficients(master.basis, func)
        where = {key: i for i, key in enumerate(master.keys[:master.n_own])}
        for c in range(space.n_own, space.ncols):
            x[c] = xm[where[space.dofs[c].key]]
    return x


def sample_points(space) -> np.ndarray:
    """Interior quadrature points plus boundary points of a local space."""
    return np.vstack([space.load_points] + [pc.points for pc in space.pieces])


def projector_errors(space, func, master=None):
    """Max relative errors of the three projectors of the columns of a polynomial, compared as functions."""
    x = column_values(space, func, master)
    pts = sample_points(space)
    qv, gq = func(pts), func.grad(pts)
    B = space.basis.evaluate(pts)
    B1 = B[:, :space.G.shape[1]]
    qn, gn = np.abs(qv).max(), max(np.abs(gq).max(), 1e-300)
    grad = np.stack([B1 @ gj for gj in space.pi0_grad(x)], axis=1)
    return (np.abs(B @ space.pi_nabla(x) - qv).max() / qn,
            np.abs(grad - gq).max() / gn,
            np.abs(B @ space.pi0(x) - qv).max() / qn)


def consistency_gap(space, w, q, kappa=1.0, master=None):
    """``|a_h(w, q) - kappa int Pi0grad w . grad q|`` over the Cauchy-Schwarz scale of ``a_h``."""
    K, _ = space.stiffness(kappa)
    xq = column_values(space, q, master)
    g = gradient_coefficients(space.basis, fit_coefficients(space.basis, q))
    n1 = g.shape[1]
    H1 = space.H[:n1, :n1]
    Gw = np.einsum("jbc,c->jb", space.G, w)
    exact = kappa * sum(Gw[j] @ H1 @ g[j] for j in range(space.dim))
    scale = np.sqrt(abs(w @ K @ w) * abs(xq @ K @ xq)) + 1e-300
    return abs(w @ K @ xq - exact) / scale


# -- shared oracles -------------------------------------------------------------------

def square(ident=0, side=1.0, origin=(0.0, 0.0), tag="interior"):
    o = np.asarray(origin, dtype=float)
    P = o + side * np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    segs = [Segment(P[i], P[(i + 1) % 4], edge_id=i, tag=tag) for i in range(4)]
    return PolygonView(segs, [0, 1, 2, 3], ident)



def local_poly(view, k, rng):
    P = view.vertices
    return GlobalPolynomial(2, k, rng, origin=P.mean(axis=0), scale=np.ptp(P, axis=0).max())



def trace_fit_error(view, geo, A, T, rng):
    """Relative max error of p* on the curved edge when the dofs come from a random q in P_k."""
    c = rng.uniform(-1, 1, A.shape[1])
    seg = next(s for s in view.segments if s.curved)
    B = geo.basis.evaluate(seg.point(np.linspace(0, 1, 41)))
    return np.abs(B @ (T @ (A @ c)) - B @ c).max() / np.abs(B @ c).max()



def fan_moments_oracle(view, basis, centre):
    """Moments by adaptive integration along each edge of a fan around ``centre``.

    Over the triangle spanned by ``centre`` and the edge point ``x(s)``, points
    are ``centre + r (x(s) - centre)`` with area element ``r |(x - c) x x'|``;
    the radial integral of a polynomial is done exactly by Gauss-Legendre.
    """
    r, wr = np.polynomial.legendre.leggauss(basis.degree + 2)
    r, wr = 0.5 * (r + 1), 0.5 * wr
    total = np.zeros(len(basis))
    for seg in view.segments:
        def integrand(s):
            x = seg.point([s])[0]
            dx = seg.derivative([s])[0]
            d = x - centre
            jac = d[0] * dx[1] - d[1] * dx[0]
            pts = centre + r[:, None] * d
            return jac * (basis.evaluate(pts).T @ (wr * r))
        total += scipy.integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-16, epsrel=1e-14)[0]
    return total


# -- random 2D cells -------------------------------------------------------------------

def _arc(a, b, sagitta):
    """Circular arc from ``a`` to ``b`` bulging ``sagitta`` to the right of the chord."""
    d = b - a
    L = np.linalg.norm(d)
    left = np.array([-d[1], d[0]]) / L
    R = (L**2 / 4 + sagitta**2) / (2 * abs(sagitta))
    centre = 0.5 * (a + b) + np.sign(sagitta) * left * (R - abs(sagitta))
    t0 = math.atan2(*(a - centre)[::-1])
    t1 = math.atan2(*(b - centre)[::-1])
    dt = (t1 - t0 + math.pi) % (2 * math.pi) - math.pi
    return Curve("circular_arc", {"center": centre.tolist(), "radius": R}, t0, t0 + dt), centre, R


def random_curved_polygon(rng, n_vertices: int, kind: str = "bubble", amplitude=None, ident: int = 0,
                          curved_index=None):
    """Convex-ish polygon with one curved edge, random size and position.

    Returns (view, info) where ``info`` holds the curve and, for arcs, its centre and radius.
    Draws are repeated until the cell is star-shaped about its centroid.
    """
    while True:
        view, info = _draw_polygon(rng, n_vertices, kind, amplitude, ident, curved_index)
        try:
            cell_rule(view, 10, n_curved=32, centre=geometric_measures(view)[1])
        except ValueError:
            continue
        return view, info


def _draw_polygon(rng, n_vertices, kind, amplitude, ident, curved_index):
    angles = np.sort(rng.uniform(0, 2 * np.pi / n_vertices, n_vertices) * 0.5
                     + np.arange(n_vertices) * 2 * np.pi / n_vertices)
    radii = rng.uniform(0.8, 1.2, n_vertices)
    scale = 10 ** rng.uniform(-1.5, 0.5)
    shift = rng.uniform(-3, 3, 2)
    P = shift + scale * np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
    ci = int(rng.integers(n_vertices)) if curved_index is None else curved_index
    a, b = P[ci], P[(ci + 1) % n_vertices]
    L = np.linalg.norm(b - a)
    amp = rng.uniform(0.05, 0.15) * rng.choice([-1, 1]) if amplitude is None else amplitude
    info = {}
    if kind == "arc":
        curve, centre, R = _arc(a, b, amp * L)
        info.update(centre=centre, radius=R)
    else:
        curve = Curve("cubic_bubble", {"start": a.tolist(), "end": b.tolist(), "amplitude": amp}, 0.0, 1.0)
    info["curve"] = curve
    segs = []
    for i in range(n_vertices):
        j = (i + 1) % n_vertices
        segs.append(Segment(P[i], P[j], curve if i == ci else None, False, edge_id=i, sign=1))
    return PolygonView(segs, list(range(n_vertices)), ident), info


def curved_pair(rng, kind: str = "arc", n_master: int = 4, n_slave: int = 4):
    """Master polygon and a neighbouring slave sharing its curved edge (shared vertex ids)."""
    while True:
        master, info = random_curved_polygon(rng, n_master, kind, curved_index=n_master - 1, ident=0)
        slave = _slave_of(rng, master, info, n_slave)
        try:
            cell_rule(slave, 10, n_curved=32, centre=geometric_measures(slave)[1])
        except ValueError:
            continue
        return master, slave, info


def _slave_of(rng, master, info, n_slave):
    a, b = master.segments[-1].start, master.segments[-1].end  # curved edge a -> b
    d = b - a
    right = np.array([d[1], -d[0]])
    pts = [b, a] + [a + t * d + right * rng.uniform(0.8, 1.1) for t in np.linspace(0, 1, n_slave - 2)]
    n_master = len(master.segments)
    ids = [0, n_master - 1] + list(range(n_master, n_master + n_slave - 2))
    segs = [Segment(b, a, info["curve"], True, edge_id=n_master - 1, sign=-1)]
    for i in range(1, n_slave):
        segs.append(Segment(pts[i], pts[(i + 1) % n_slave], None, False, edge_id=100 + i, sign=1))
    return PolygonView(segs, ids, 1)


# -- random 3D cells -------------------------------------------------------------------

def _rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q


def random_bubble_mesh(rng) -> Mesh:
    """One bulged-corner subcube (two cells) under a random similarity map.

    Draws are repeated until both cells are star-shaped about their centroids.
    """
    while True:
        mesh = _draw_bubble_mesh(rng)
        try:
            for cid in range(2):
                view = polyhedron_view(mesh, cid)
                cell_rule(view, 8, 24, centre=geometric_measures(view)[1])
        except ValueError:
            continue
        return mesh


def _draw_bubble_mesh(rng) -> Mesh:
    mesh = generate_bubble_mesh(1, 1, constant=rng.uniform(0.05, 0.2) * rng.choice([-1, 1]))
    Rm, s, t = _rotation(rng), 10 ** rng.uniform(-1, 0.3), rng.uniform(-2, 2, 3)
    mesh.vertices = t + s * mesh.vertices @ Rm.T
    for f in mesh.faces:
        if f.patch is not None:
            p = dict(f.patch.params)
            for key in ("a", "b", "c"):
                p[key] = (t + s * np.asarray(p[key]) @ Rm.T).tolist()
            p["normal"] = (np.asarray(p["normal"]) @ Rm.T).tolist()
            p["amplitude"] = s * p["amplitude"]
            f.patch = SurfacePatch(f.patch.kind, p)
    return assign_roles(mesh, inplace=True)


def random_bulged_cell(rng, top_tag: str) -> Mesh:
    """Single hexahedron with a bulged top face, scaled and shifted at random."""
    mesh = generate_bulged_cube_mesh(1, amplitude=rng.uniform(0.02, 0.2), top_tag=top_tag)
    s, t = 10 ** rng.uniform(-1, 0.3), rng.uniform(-2, 2, 3)
    mesh.vertices = t + s * mesh.vertices
    for f in mesh.faces:
        if f.patch is not None:
            p = dict(f.patch.params)
            p.update(x0=t[0] + s * p["x0"], x1=t[0] + s * p["x1"], y0=t[1] + s * p["y0"], y1=t[1] + s * p["y1"],
                     z0=t[2] + s * p["z0"], amplitude=s * p["amplitude"])
            f.patch = SurfacePatch(f.patch.kind, p)
    return mesh


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance.LINES:
            terminalreporter.write_line(line)
