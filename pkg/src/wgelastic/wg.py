"""Lowest-order weak Galerkin space for vector fields.

A field ``v = {v0, vb}`` carries a vector P1 polynomial per cell (nodal values
at the cell's vertices) and a constant vector per facet.  Because the weak
operators are tested against constants, the weak gradient and divergence of
``v`` only see the facet part:

    grad_w v |_T = sum_i vb_i (x) g_i,   div_w v |_T = sum_i vb_i . g_i,

with ``g_i = |e_i| n_i / |T|`` for the facet ``e_i`` opposite vertex ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import SimplicialMesh
from .quadrature import MAX_DEGREE, cell_chunks, cell_points, integrate_cells, integrate_facets


@dataclass(frozen=True, eq=False)
class DofMap:
    """Layout of WG coefficients: all interior blocks first, then facet blocks.

    Interior coefficient of cell ``t``, vertex ``k``, component ``c`` sits at
    ``interior_offset[t] + k*d + c``; facet coefficient of facet ``f``,
    component ``c`` at ``facet_offset[f] + c``.  Facet DOFs on the boundary
    are constrained.
    """

    dim: int
    interior_offset: np.ndarray
    facet_offset: np.ndarray
    constrained: np.ndarray  # bool mask over all DOFs
    free: np.ndarray  # indices of unconstrained DOFs

    @classmethod
    def from_mesh(cls, mesh: SimplicialMesh) -> "DofMap":
        d = mesh.dim
        nloc = d * (d + 1)
        n_int = nloc * mesh.n_cells
        interior_offset = nloc * np.arange(mesh.n_cells)
        facet_offset = n_int + d * np.arange(mesh.n_facets)
        constrained = np.zeros(n_int + d * mesh.n_facets, dtype=bool)
        constrained[n_int:] = np.repeat(mesh.facet_boundary, d)
        free = np.flatnonzero(~constrained)
        for a in (interior_offset, facet_offset, constrained, free):
            a.setflags(write=False)
        return cls(d, interior_offset, facet_offset, constrained, free)

    @property
    def n_dofs(self) -> int:
        return self.constrained.size

    @property
    def n_free(self) -> int:
        return self.free.size

    @property
    def n_interior(self) -> int:
        return int(self.facet_offset[0]) if self.facet_offset.size else self.n_dofs

    def interior_dofs(self) -> np.ndarray:
        """(nc, d+1, d) global indices of interior coefficients."""
        d = self.dim
        return self.interior_offset[:, None, None] + np.arange(d * (d + 1)).reshape(d + 1, d)

    def facet_dofs(self) -> np.ndarray:
        """(nf, d) global indices of facet coefficients."""
        return self.facet_offset[:, None] + np.arange(self.dim)

    def cell_dofs(self, mesh: SimplicialMesh) -> np.ndarray:
        """(nc, 2d(d+1)) local-to-global map: interior block, then local facets."""
        nc = mesh.n_cells
        inner = self.interior_dofs().reshape(nc, -1)
        outer = self.facet_dofs()[mesh.cell_facets].reshape(nc, -1)
        return np.hstack([inner, outer])


@dataclass(eq=False)
class WGField:
    coeffs: np.ndarray
    dof_map: DofMap

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.dof_map.n_dofs,):
            raise ValueError(f"expected {self.dof_map.n_dofs} coefficients, got {self.coeffs.shape}")

    @classmethod
    def zeros(cls, dof_map: DofMap) -> "WGField":
        return cls(np.zeros(dof_map.n_dofs), dof_map)

    @classmethod
    def from_parts(cls, dof_map: DofMap, interior, facet) -> "WGField":
        c = np.empty(dof_map.n_dofs)
        c[: dof_map.n_interior] = np.asarray(interior, dtype=float).ravel()
        c[dof_map.n_interior:] = np.asarray(facet, dtype=float).ravel()
        return cls(c, dof_map)

    @property
    def interior(self) -> np.ndarray:
        """(nc, d+1, d) nodal values of v0."""
        d = self.dof_map.dim
        return self.coeffs[: self.dof_map.n_interior].reshape(-1, d + 1, d)

    @property
    def facet(self) -> np.ndarray:
        """(nf, d) facet constants vb."""
        return self.coeffs[self.dof_map.n_interior:].reshape(-1, self.dof_map.dim)

    def free_values(self) -> np.ndarray:
        return self.coeffs[self.dof_map.free]

    def __sub__(self, other: "WGField") -> "WGField":
        return WGField(self.coeffs - other.coeffs, self.dof_map)


def flux_vectors(mesh: SimplicialMesh) -> np.ndarray:
    """(nc, d+1, d) array of ``|e_i| n_i / |T|``."""
    return mesh.cell_facet_measure[:, :, None] * mesh.outward_normals / mesh.cell_volume[:, None, None]


def centroid_operator(d: int) -> np.ndarray:
    """Maps P1 nodal values to values at facet centroids (row i: facet opposite vertex i)."""
    return (np.ones((d + 1, d + 1)) - np.eye(d + 1)) / d


def _local_facet_values(mesh: SimplicialMesh, field: WGField) -> np.ndarray:
    return field.facet[mesh.cell_facets]


def weak_gradient(mesh: SimplicialMesh, field: WGField) -> np.ndarray:
    """Per-cell constant weak gradient, shape (nc, d, d); row index is the component."""
    return np.einsum("cia,cib->cab", _local_facet_values(mesh, field), flux_vectors(mesh))


def weak_divergence(mesh: SimplicialMesh, field: WGField) -> np.ndarray:
    """Per-cell constant weak divergence, shape (nc,)."""
    return np.einsum("cia,cia->c", _local_facet_values(mesh, field), flux_vectors(mesh))


def p1_mass_inverse(mesh: SimplicialMesh, cells=slice(None)) -> np.ndarray:
    """Closed-form inverse of the vertex-nodal P1 mass matrix, (nc, d+1, d+1)."""
    d = mesh.dim
    scale = (d + 1) * (d + 2) / mesh.cell_volume[cells]
    base = np.eye(d + 1) - np.ones((d + 1, d + 1)) / (d + 2)
    return scale[:, None, None] * base


def p1_mass(mesh: SimplicialMesh) -> np.ndarray:
    d = mesh.dim
    base = (np.eye(d + 1) + np.ones((d + 1, d + 1))) / ((d + 1) * (d + 2))
    return mesh.cell_volume[:, None, None] * base


def project_Q0(mesh: SimplicialMesh, u, degree: int = MAX_DEGREE) -> np.ndarray:
    """L2 projection of ``u`` onto cellwise vector P1; returns (nc, d+1, d) nodal values."""
    out = np.empty((mesh.n_cells, mesh.dim + 1, mesh.dim))
    for cells in cell_chunks(mesh):
        x, w, bary = cell_points(mesh, degree, cells)
        val = np.asarray(u(x.reshape(-1, mesh.dim)), dtype=float).reshape(x.shape)
        moments = np.einsum("cq,qk,cqa->cka", w, bary, val)
        out[cells] = np.einsum("ckj,cja->cka", p1_mass_inverse(mesh, cells), moments)
    return out


def project_Qb(mesh: SimplicialMesh, u, degree: int = MAX_DEGREE) -> np.ndarray:
    """Facet averages of ``u``, shape (nf, d)."""
    return integrate_facets(mesh, u, degree) / mesh.facet_measure[:, None]


def project_Qh(mesh: SimplicialMesh, u, degree: int = MAX_DEGREE, dof_map: DofMap | None = None) -> WGField:
    dof_map = dof_map or DofMap.from_mesh(mesh)
    return WGField.from_parts(dof_map, project_Q0(mesh, u, degree), project_Qb(mesh, u, degree))


def project_scalar_avg(mesh: SimplicialMesh, rho, degree: int = MAX_DEGREE) -> np.ndarray:
    return integrate_cells(mesh, rho, degree) / mesh.cell_volume


def project_tensor_avg(mesh: SimplicialMesh, G, degree: int = MAX_DEGREE) -> np.ndarray:
    return integrate_cells(mesh, G, degree) / mesh.cell_volume[:, None, None]


def rt0_basis_scale(mesh: SimplicialMesh) -> np.ndarray:
    """(nc, d+1) factors ``|e_i| / (d |T|)`` of the RT0 basis ``psi_i = s_i (x - p_i)``."""
    return mesh.cell_facet_measure / (mesh.dim * mesh.cell_volume[:, None])


def rt0_reconstruct(mesh: SimplicialMesh, cell: int, facet_values) -> np.ndarray:
    """RT0 coefficients ``c_i = vb_i . n_i`` of the reconstruction on one cell."""
    facet_values = np.asarray(facet_values, dtype=float)
    return np.einsum("ia,ia->i", facet_values, mesh.outward_normals[cell])


def rt0_coefficients(mesh: SimplicialMesh, field: WGField) -> np.ndarray:
    """RT0 coefficients on every cell, shape (nc, d+1)."""
    return np.einsum("cia,cia->ci", _local_facet_values(mesh, field), mesh.outward_normals)


def rt0_evaluate(mesh: SimplicialMesh, cell: int, coeffs, x) -> np.ndarray:
    """Evaluate ``sum_i c_i psi_i`` at points ``x`` of shape (m, d)."""
    x = np.atleast_2d(x)
    p = mesh.vertices[mesh.cells[cell]]
    s = rt0_basis_scale(mesh)[cell] * np.asarray(coeffs)
    return s.sum() * x - s @ p


def rt0_divergence(mesh: SimplicialMesh, coeffs: np.ndarray) -> np.ndarray:
    """Divergence of RT0 fields given per-cell coefficients (nc, d+1)."""
    return np.einsum("ci,ci->c", coeffs, mesh.cell_facet_measure) / mesh.cell_volume


def stabilizer_jumps(mesh: SimplicialMesh, field: WGField) -> np.ndarray:
    """``Q_b v0 - vb`` on every (cell, local facet), shape (nc, d+1, d).

    Q_b of a P1 function is its value at the facet centroid.
    """
    P = centroid_operator(mesh.dim)
    return np.einsum("ik,cka->cia", P, field.interior) - _local_facet_values(mesh, field)


def stabilizer_jump(mesh: SimplicialMesh, field: WGField, cell: int, local_facet: int) -> np.ndarray:
    P = centroid_operator(mesh.dim)
    v0 = field.interior[cell]
    return P[local_facet] @ v0 - field.facet[mesh.cell_facets[cell, local_facet]]


def stabilizer_scale(mesh: SimplicialMesh) -> np.ndarray:
    """Per-cell factor ``1/h_T`` of the stabilizer."""
    return 1.0 / mesh.cell_diameter


def triple_norm(mesh: SimplicialMesh, field: WGField) -> float:
    """Discrete energy norm: weak-gradient part plus scaled facet jumps."""
    G = weak_gradient(mesh, field)
    grad_part = np.einsum("c,cab,cab->", mesh.cell_volume, G, G)
    J = stabilizer_jumps(mesh, field)
    jump_part = np.einsum("c,ci,cia,cia->", stabilizer_scale(mesh), mesh.cell_facet_measure, J, J)
    return float(np.sqrt(grad_part + jump_part))


def l2_norm_interior(mesh: SimplicialMesh, field: WGField) -> float:
    """L2 norm of the cellwise P1 part, integrated exactly."""
    v0 = field.interior
    return float(np.sqrt(np.einsum("cka,ckj,cja->", v0, p1_mass(mesh), v0)))
