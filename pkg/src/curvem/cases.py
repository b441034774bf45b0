"""Named test cases: mesh family, data for the patch test and for convergence studies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .geometry import Mesh
from .meshgen import generate_bubble_mesh, generate_bulged_cube_mesh, generate_disk_interface_mesh
from .problems import ProblemSpec, cubic_problem, disk_problem, polynomial_problem, smooth_problem


@dataclass(frozen=True)
class Case:
    name: str
    dim: int
    patch_mesh: Callable[[int], Mesh]  # seed -> mesh
    patch_problem: Callable[[int], ProblemSpec]  # k -> polynomial data of degree <= k
    level_mesh: Callable[[int, int], Mesh]  # (level, seed) -> mesh
    smooth_problem: Callable[[], ProblemSpec]
    patch_tolerance: float

    def rate_tolerance(self, k: int) -> float:
        if self.dim == 2 and k <= 3:
            return 0.15
        return 0.2


LOW_DEGREE_TERMS = {
    1: {(0, 0, 0): 1.0, (1, 0, 0): 1.0, (0, 1, 0): -2.0, (0, 0, 1): 0.5},
    2: {(1, 1, 0): 1.0, (0, 0, 2): -1.0, (2, 0, 0): 0.5, (0, 1, 1): 0.75},
}


def _cube_patch_problem(k: int) -> ProblemSpec:
    if k >= 3:
        return cubic_problem()
    terms = {}
    for d in range(1, k + 1):
        terms.update(LOW_DEGREE_TERMS[d])
    return polynomial_problem(terms, 3)


def _disk_patch_problem(k: int) -> ProblemSpec:
    if k < 2:
        raise ValueError("the disk2d patch solution is piecewise quadratic; it needs k >= 2")
    return disk_problem(1.0, 1.0)


def _disk_patch(seed: int) -> Mesh:
    return generate_disk_interface_mesh(1, 8, refinement=1, perturbation=0.1, seed=seed)


def _disk_level(level: int, seed: int) -> Mesh:
    # level 0 is one refinement of the base layout; coarser meshes are pre-asymptotic
    return generate_disk_interface_mesh(1, 8, refinement=level + 1)


def _bubble(beta: int):
    return lambda seed: generate_bubble_mesh(6, beta), lambda level, seed: generate_bubble_mesh(6 * 2**level, beta)


_b1_patch, _b1_level = _bubble(1)
_b2_patch, _b2_level = _bubble(2)

CASES = {
    "disk2d": Case("disk2d", 2, _disk_patch, _disk_patch_problem, _disk_level, disk_problem, 1e-10),
    "bubble3d-b1": Case("bubble3d-b1", 3, _b1_patch, _cube_patch_problem, _b1_level, smooth_problem, 1e-8),
    "bubble3d-b2": Case("bubble3d-b2", 3, _b2_patch, _cube_patch_problem, _b2_level, smooth_problem, 1e-8),
    "bulged-neumann": Case("bulged-neumann", 3, lambda seed: generate_bulged_cube_mesh(4), _cube_patch_problem,
                           lambda level, seed: generate_bulged_cube_mesh(4 * 2**level), smooth_problem, 1e-8),
}
ALIASES = {"bubble3d-β1": "bubble3d-b1", "bubble3d-β2": "bubble3d-b2", "bubble3d-beta1": "bubble3d-b1",
           "bubble3d-beta2": "bubble3d-b2"}


def get_case(name: str) -> Case:
    key = ALIASES.get(name, name)
    if key not in CASES:
        raise KeyError(f"unknown case {name!r}; choose from {', '.join(CASES)}")
    return CASES[key]
