"""Linear solve, error norms against an exact solution and convergence rates."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import GlobalSystem, LocalSpaces, Options, assemble, build_local_spaces
from .geometry import Mesh, mesh_statistics
from .problems import ProblemSpec

log = logging.getLogger(__name__)

ZERO_NORM = 1e-14


class SolverError(RuntimeError):
    def __init__(self, message: str, residuals: list):
        super().__init__(message)
        self.residuals = residuals


def solve(system: GlobalSystem, rtol: float = 1e-12, maxiter: int | None = None, method: str = "cg") -> np.ndarray:
    """Free dof values by Jacobi-preconditioned CG.

    ``method="direct"`` uses sparse LU; ``method="auto"`` tries CG and falls back
    to sparse LU, logging the CG failure report, when the iteration cap is hit.
    """
    A, b = system.matrix, system.rhs
    if A.shape[0] == 0:
        return np.zeros(0)
    if method == "direct":
        return spla.spsolve(A.tocsc(), b)
    if method == "auto":
        try:
            return conjugate_gradient(A, b, rtol, maxiter)
        except SolverError as exc:
            log.warning("%s; falling back to sparse LU", exc)
            return spla.spsolve(A.tocsc(), b)
    if method != "cg":
        raise ValueError(f"unknown solver {method!r}")
    return conjugate_gradient(A, b, rtol, maxiter)


def conjugate_gradient(A, b, rtol: float = 1e-12, maxiter: int | None = None) -> np.ndarray:
    """Jacobi PCG stopping at ``|b - A x| <= rtol |b|``; at most ``20 sqrt(n)`` iterations by default."""
    n = A.shape[0]
    maxiter = maxiter or max(1, int(math.ceil(20 * math.sqrt(n))))
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("matrix diagonal is not positive", [])
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n)
    inv_d = 1.0 / d
    x = np.zeros(n)
    r = b.copy()
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    history = [1.0]
    for _ in range(maxiter):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r)) / bnorm
        history.append(res)
        if res <= rtol:
            return x
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not reach relative residual {rtol:g} in {maxiter} iterations "
                      f"(last {history[-1]:.3e})", history)


@dataclass
class Errors:
    h1: float  # relative broken H1 seminorm error of Pi0 grad
    l2: float  # relative L2 error of Pi-nabla
    h1_abs: float
    l2_abs: float


def compute_errors(system: GlobalSystem, x_all: np.ndarray) -> Errors:
    """``|grad u - Pi0 grad u_h| / |grad u|`` and ``|u - Pi-nabla u_h| / |u|`` over all cells."""
    problem = system.problem
    if problem.exact is None or problem.exact_grad is None:
        raise ValueError("problem has no exact solution")
    regions = np.array([c.region for c in system.mesh.cells])
    e1 = n1 = e0 = n0 = 0.0
    for grp in system.spaces.groups:
        spc = grp.space
        x = x_all[grp.columns]  # (nc, ncols)
        X = spc.load_points[None] + grp.shifts[:, None, :]
        w = spc.load_weights
        phi = spc.basis.evaluate(spc.load_points)
        phi1 = phi[:, :spc.G.shape[1]]
        uh = (x @ spc.P.T + spc.p0) @ phi.T  # (nc, nq)
        gh = np.stack([(x @ spc.G[j].T + spc.g0[j]) @ phi1.T for j in range(spc.dim)], axis=-1)
        for r in np.unique(regions[grp.cells]):
            sel = regions[grp.cells] == r
            pts = X[sel].reshape(-1, spc.dim)
            u = np.asarray(problem.exact(pts, r)).reshape(-1, len(w))
            g = np.asarray(problem.exact_grad(pts, r)).reshape(-1, len(w), spc.dim)
            e0 += float(np.sum(w * (u - uh[sel]) ** 2))
            n0 += float(np.sum(w * u**2))
            e1 += float(np.sum(w[:, None] * (g - gh[sel]) ** 2))
            n1 += float(np.sum(w[:, None] * g**2))
    e1, e0, n1, n0 = (math.sqrt(v) for v in (e1, e0, n1, n0))
    # a vanishing exact solution has no relative error; report the absolute one
    return Errors(e1 / n1 if n1 >= ZERO_NORM else e1, e0 / n0 if n0 >= ZERO_NORM else e0, e1, e0)


def convergence_rates(h, e) -> np.ndarray:
    """Slopes ``log(e_i/e_{i-1}) / log(h_i/h_{i-1})`` between consecutive levels."""
    h, e = np.asarray(h, dtype=float), np.asarray(e, dtype=float)
    return np.log(e[1:] / e[:-1]) / np.log(h[1:] / h[:-1])


@dataclass
class Result:
    stats: dict
    errors: Errors
    n_free: int
    system: GlobalSystem
    solution: np.ndarray


def run(mesh: Mesh, problem: ProblemSpec, options: Options, spaces: LocalSpaces | None = None,
        method: str = "auto") -> Result:
    """Build, assemble, solve and measure errors on one mesh."""
    spaces = spaces or build_local_spaces(mesh, options, problem)
    system = assemble(mesh, options, problem, spaces)
    free = solve(system, method=method)
    x_all = system.full_vector(free)
    stats = mesh_statistics(mesh, spaces.diameters)
    return Result(stats, compute_errors(system, x_all), system.table.n_free, system, x_all)
