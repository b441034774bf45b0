"""Scaled monomial bases of P_k in two and three variables.

A member is ``p_alpha(x) = prod_j ((x_j - c_j) / h) ** alpha_j`` where ``c`` is
the element centroid and ``h`` its diameter. Members are ordered graded
lexicographically: by total degree first, then by descending exponent tuple.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def basis_dimension(k: int, d: int) -> int:
    """Dimension of the space of polynomials of degree <= k in d variables."""
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    if k < -1:
        raise ValueError(f"degree must be >= -1, got {k}")
    if k < 0:
        return 0
    if d == 2:
        return (k + 1) * (k + 2) // 2
    return (k + 1) * (k + 2) * (k + 3) // 6


def _compositions(s: int, d: int):
    # exponent tuples of total degree s, descending lexicographic order
    if d == 1:
        yield (s,)
        return
    for first in range(s, -1, -1):
        for rest in _compositions(s - first, d - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def multi_indices(k: int, d: int) -> tuple[tuple[int, ...], ...]:
    """Graded lexicographic list of exponent tuples of degree <= k."""
    if k < 0:
        return ()
    out = []
    for s in range(k + 1):
        out.extend(_compositions(s, d))
    return tuple(out)


@lru_cache(maxsize=None)
def _index_table(k: int, d: int) -> dict:
    return {a: i for i, a in enumerate(multi_indices(k, d))}


@lru_cache(maxsize=None)
def product_table(ka: int, kb: int, d: int) -> np.ndarray:
    """Index in the degree ``ka + kb`` list of ``alpha + beta``."""
    table = _index_table(ka + kb, d)
    A = multi_indices(ka, d)
    B = multi_indices(kb, d)
    out = np.empty((len(A), len(B)), dtype=np.intp)
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            out[i, j] = table[tuple(x + y for x, y in zip(a, b))]
    return out


@lru_cache(maxsize=None)
def derivative_table(k: int, d: int) -> np.ndarray:
    """Unscaled derivative matrices.

    ``T[j, a, b]`` is the coefficient of monomial ``b`` (degree <= k-1) in the
    derivative along axis ``j`` of the unscaled monomial ``a`` (degree <= k).
    Divide by the diameter to get derivatives of scaled monomials.
    """
    A = multi_indices(k, d)
    lower = _index_table(k - 1, d) if k >= 1 else {}
    out = np.zeros((d, len(A), basis_dimension(k - 1, d)))
    for i, a in enumerate(A):
        for j in range(d):
            if a[j] > 0:
                b = list(a)
                b[j] -= 1
                out[j, i, lower[tuple(b)]] = a[j]
    return out


@lru_cache(maxsize=None)
def laplacian_table_unscaled(k: int, d: int) -> np.ndarray:
    """Coefficients of the Laplacian of each degree <= k monomial over degree <= k-2.

    Divide by ``h**2`` for scaled monomials.
    """
    A = multi_indices(k, d)
    lower = _index_table(k - 2, d) if k >= 2 else {}
    out = np.zeros((len(A), basis_dimension(k - 2, d)))
    for i, a in enumerate(A):
        for j in range(d):
            if a[j] >= 2:
                b = list(a)
                b[j] -= 2
                out[i, lower[tuple(b)]] += a[j] * (a[j] - 1)
    return out


class ScaledMonomialBasis:
    """Monomials scaled by an element centroid and diameter."""

    def __init__(self, dim: int, degree: int, centroid, diameter: float):
        if dim not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {dim}")
        if diameter <= 0:
            raise ValueError("diameter must be positive")
        self.dim = dim
        self.degree = degree
        self.centroid = np.asarray(centroid, dtype=float).reshape(dim)
        self.diameter = float(diameter)
        self.index_list = multi_indices(degree, dim)
        self.exponents = np.array(self.index_list, dtype=np.intp).reshape(-1, dim)
        self.degrees = self.exponents.sum(axis=1)

    def __len__(self) -> int:
        return len(self.index_list)

    def __repr__(self) -> str:
        return (f"ScaledMonomialBasis(dim={self.dim}, degree={self.degree}, "
                f"centroid={self.centroid.tolist()}, diameter={self.diameter})")

    def with_degree(self, degree: int) -> "ScaledMonomialBasis":
        return ScaledMonomialBasis(self.dim, degree, self.centroid, self.diameter)

    def scaled(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return (pts - self.centroid) / self.diameter

    def _powers(self, s: np.ndarray) -> np.ndarray:
        # powers[j, p, e] = s[p, j] ** e
        k = max(self.degree, 0)
        return s.T[:, :, None] ** np.arange(k + 1)

    def evaluate(self, points) -> np.ndarray:
        """Values of all members, shape ``(npoints, nbasis)``."""
        s = self.scaled(points)
        pw = self._powers(s)
        out = pw[0][:, self.exponents[:, 0]]
        for j in range(1, self.dim):
            out = out * pw[j][:, self.exponents[:, j]]
        return out

    def gradient(self, points) -> np.ndarray:
        """Gradients of all members, shape ``(npoints, nbasis, dim)``."""
        s = self.scaled(points)
        pw = self._powers(s)
        e = self.exponents
        cols = [pw[j][:, e[:, j]] for j in range(self.dim)]
        out = np.empty((s.shape[0], len(self), self.dim))
        for j in range(self.dim):
            dj = np.where(e[:, j] > 0, e[:, j], 0) * pw[j][:, np.maximum(e[:, j] - 1, 0)]
            term = dj
            for i in range(self.dim):
                if i != j:
                    term = term * cols[i]
            out[:, :, j] = term / self.diameter
        return out

    def derivative_matrices(self) -> np.ndarray:
        """``D[j]`` maps member ``a`` to coefficients of its ``x_j`` derivative."""
        return derivative_table(self.degree, self.dim) / self.diameter

    def laplacian_table(self) -> np.ndarray:
        """Laplacian of each member over the degree ``k-2`` basis, same centroid/diameter."""
        return laplacian_table_unscaled(self.degree, self.dim) / self.diameter**2

    def eval_gradient_and_laplacian(self, point):
        """Gradient of every member at ``point`` and the exact Laplacian table."""
        return self.gradient(point)[0], self.laplacian_table()

    def homogeneous_slice(self, s: int) -> np.ndarray:
        """Indices of members of total degree exactly ``s``."""
        if not 0 <= s <= self.degree:
            raise ValueError(f"slice degree {s} outside [0, {self.degree}]")
        return np.flatnonzero(self.degrees == s)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "degree": self.degree,
            "centroid": self.centroid.tolist(),
            "diameter": self.diameter,
            "index_list": [list(a) for a in self.index_list],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScaledMonomialBasis":
        basis = cls(data["dim"], data["degree"], data["centroid"], data["diameter"])
        stored = tuple(tuple(a) for a in data.get("index_list", basis.index_list))
        if stored != basis.index_list:
            raise ValueError("stored index list does not match graded lexicographic order")
        return basis


def eval_basis(basis: ScaledMonomialBasis, point) -> np.ndarray:
    """Values of every member at a single point."""
    return basis.evaluate(point)[0]


def eval_gradient_and_laplacian(basis: ScaledMonomialBasis, point):
    return basis.eval_gradient_and_laplacian(point)


def homogeneous_slice(basis: ScaledMonomialBasis, s: int) -> np.ndarray:
    return basis.homogeneous_slice(s)
