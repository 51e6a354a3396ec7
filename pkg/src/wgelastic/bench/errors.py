"""Discrete error norms of a WG solution against a manufactured solution."""
from __future__ import annotations

from ..mesh import SimplicialMesh
from ..wg import WGField, l2_norm_interior, project_Qh, triple_norm


def error_field(mesh: SimplicialMesh, u, solution: WGField, degree: int = 6) -> WGField:
    """``Q_h u - u_h`` with boundary facets carrying the facet averages of ``u``."""
    return project_Qh(mesh, u, degree, solution.dof_map) - solution


def energy_error(mesh: SimplicialMesh, u, solution: WGField, degree: int = 6) -> float:
    return triple_norm(mesh, error_field(mesh, u, solution, degree))


def l2_error(mesh: SimplicialMesh, u, solution: WGField, degree: int = 6) -> float:
    return l2_norm_interior(mesh, error_field(mesh, u, solution, degree))


def both_errors(mesh: SimplicialMesh, u, solution: WGField, degree: int = 6) -> tuple[float, float]:
    e = error_field(mesh, u, solution, degree)
    return triple_norm(mesh, e), l2_norm_interior(mesh, e)
