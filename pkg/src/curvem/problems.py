"""Model problems: region-wise diffusion, data and (optionally) the exact solution.

All callables are vectorized over points ``X`` of shape ``(n, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass
class ProblemSpec:
    """``-div(kappa grad u) = f``, ``u = g_D`` on the Dirichlet part, ``kappa du/dn = g_N`` on the Neumann part."""

    name: str
    kappa: dict
    source: Callable  # (X, region) -> f
    dirichlet: Callable  # X -> g_D
    neumann: Callable  # (X, normals, region) -> g_N
    exact: Callable | None = None  # (X, region) -> u
    exact_grad: Callable | None = None  # (X, region) -> grad u

    def kappa_of(self, region: int) -> float:
        return float(self.kappa[region])


def from_exact(name: str, kappa: dict, u: Callable, grad: Callable, laplacian: Callable,
               dirichlet_region: int | None = None) -> ProblemSpec:
    """Manufacture data from an exact solution given per region."""

    def source(X, region):
        return -kappa[region] * laplacian(X, region)

    def neumann(X, normals, region):
        return kappa[region] * np.einsum("pj,pj->p", grad(X, region), normals)

    def dirichlet(X):
        return u(X, dirichlet_region if dirichlet_region is not None else next(iter(kappa)))

    return ProblemSpec(name, dict(kappa), source, dirichlet, neumann, u, grad)


# -- 2D disk with a circular interface -----------------------------------------

DISK_KAPPA = {1: 0.5, 2: 10.0}
DISK_INTERFACE = 0.5
# 7 pi r shifted by a full period at the interface: sin(3 pi / 2) = sin(7 pi / 2)
DISK_FREQUENCY = 3.0 * np.pi


def disk_problem(f1: float = 1.0, f2: float = 2.0, kappa=DISK_KAPPA, omega: float = DISK_FREQUENCY) -> ProblemSpec:
    """Radial solution with a gradient jump across ``r = 1/2``.

    Inside ``u = -r^2/k1 + c sin(omega/2) + (1/k1 - 1/k2)/4 + f2/k2``, outside
    ``u = -r^2/k2 + c sin(omega r) + f2/k2`` with ``c = (f2 - f1)/k2``. Both
    value and flux match at the interface when ``cos(omega/2) = 0``.
    """
    k1, k2 = kappa[1], kappa[2]
    c = (f2 - f1) / k2
    s_half = np.sin(omega * DISK_INTERFACE)
    const1 = c * s_half + 0.25 * (1 / k1 - 1 / k2) + f2 / k2

    def radius(X):
        return np.sqrt(X[:, 0] ** 2 + X[:, 1] ** 2)

    def u(X, region):
        r = radius(X)
        if region == 1:
            return -r**2 / k1 + const1
        return -r**2 / k2 + c * np.sin(omega * r) + f2 / k2

    def grad(X, region):
        X = np.asarray(X)
        if region == 1:
            return -2.0 * X / k1
        r = np.maximum(radius(X), 1e-300)
        g = -2.0 / k2 + c * omega * np.cos(omega * r) / r
        return g[:, None] * X

    def lap(X, region):
        if region == 1:
            return np.full(len(X), -4.0 / k1)
        r = np.maximum(radius(X), 1e-300)
        return -4.0 / k2 + c * (omega * np.cos(omega * r) / r - omega**2 * np.sin(omega * r))

    return from_exact("disk2d", kappa, u, grad, lap, dirichlet_region=2)


# -- 3D cube problems ------------------------------------------------------------

def cubic_problem() -> ProblemSpec:
    """``u = -x^3 + x^2 y + y^2 z - xyz + y^3 - x z^2 - z^3`` with ``kappa = 1``."""

    def u(X, region):
        x, y, z = X.T
        return -x**3 + x**2 * y + y**2 * z - x * y * z + y**3 - x * z**2 - z**3

    def grad(X, region):
        x, y, z = X.T
        return np.stack([-3 * x**2 + 2 * x * y - y * z - z**2,
                         x**2 + 2 * y * z - x * z + 3 * y**2,
                         y**2 - x * y - 2 * x * z - 3 * z**2], axis=1)

    def lap(X, region):
        x, y, z = X.T
        return -8 * x + 8 * y - 4 * z

    return from_exact("cubic", {1: 1.0}, u, grad, lap)


def smooth_problem() -> ProblemSpec:
    """``u = cos(x + y + z) exp(xyz)`` with ``kappa = 1``."""

    def u(X, region):
        x, y, z = X.T
        return np.cos(x + y + z) * np.exp(x * y * z)

    def grad(X, region):
        x, y, z = X.T
        s, e = x + y + z, np.exp(x * y * z)
        cs, sn = np.cos(s), np.sin(s)
        return np.stack([e * (-sn + cs * y * z), e * (-sn + cs * x * z), e * (-sn + cs * x * y)], axis=1)

    def lap(X, region):
        x, y, z = X.T
        s, e = x + y + z, np.exp(x * y * z)
        q = (y * z) ** 2 + (x * z) ** 2 + (x * y) ** 2
        return e * (-np.cos(s) * (3 - q) - 2 * np.sin(s) * (y * z + x * z + x * y))

    return from_exact("smooth", {1: 1.0}, u, grad, lap)


def polynomial_problem(coeffs: dict, dim: int, kappa: float = 1.0) -> ProblemSpec:
    """Global polynomial ``sum c_alpha x^alpha`` (exponent tuple -> coefficient)."""
    items = [(np.array(a), float(c)) for a, c in coeffs.items()]

    def u(X, region):
        return sum(c * np.prod(X ** a, axis=1) for a, c in items)

    def grad(X, region):
        out = np.zeros_like(X, dtype=float)
        for a, c in items:
            for j in range(dim):
                if a[j] > 0:
                    b = a.copy()
                    b[j] -= 1
                    out[:, j] += c * a[j] * np.prod(X ** b, axis=1)
        return out

    def lap(X, region):
        out = np.zeros(len(X))
        for a, c in items:
            for j in range(dim):
                if a[j] > 1:
                    b = a.copy()
                    b[j] -= 2
                    out += c * a[j] * (a[j] - 1) * np.prod(X ** b, axis=1)
        return out

    return from_exact("polynomial", {1: kappa}, u, grad, lap)
