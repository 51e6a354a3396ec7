"""Global assembly of the stabilized WG elasticity system.

The bilinear form is assembled from three sparse operators acting on the full
coefficient vector:

* ``G`` maps a field to its cellwise weak gradients,
* ``B`` maps a field to its cellwise weak divergences,
* ``J`` maps a field to its (cell, local facet) jumps ``Q_b v0 - vb``,

so that ``A = mu G' M G + (lam+mu) B' M B + J' W J`` with ``M`` the cell volumes
and ``W`` the weights ``|e| / h_T``.  The (lam+mu) part is kept separate in
:class:`SparseSystem` so solvers can treat it in mixed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .mesh import SimplicialMesh
from .quadrature import cell_chunks, cell_points
from .wg import (
    DofMap,
    WGField,
    centroid_operator,
    flux_vectors,
    project_Qb,
    rt0_basis_scale,
    stabilizer_scale,
)

ALGORITHMS = ("new", "standard")


def _check_lame(mu: float, lam: float) -> None:
    if not mu > 0 or not lam > 0:
        raise ValueError(f"Lame parameters must be positive, got mu={mu!r}, lam={lam!r}")


def gradient_operator(mesh: SimplicialMesh, dof_map: DofMap) -> sp.csr_matrix:
    """Sparse map from coefficients to weak gradients, rows ordered (cell, a, b)."""
    d, nc = mesh.dim, mesh.n_cells
    g = flux_vectors(mesh)  # (nc, i, b)
    fdofs = dof_map.facet_dofs()[mesh.cell_facets]  # (nc, i, a)
    rows = (np.arange(nc)[:, None, None, None] * d * d
            + np.arange(d)[None, None, :, None] * d
            + np.arange(d)[None, None, None, :])
    rows = np.broadcast_to(rows, (nc, d + 1, d, d))
    cols = np.broadcast_to(fdofs[:, :, :, None], (nc, d + 1, d, d))
    vals = np.broadcast_to(g[:, :, None, :], (nc, d + 1, d, d))
    return sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(nc * d * d, dof_map.n_dofs))


def divergence_operator(mesh: SimplicialMesh, dof_map: DofMap) -> sp.csr_matrix:
    """Sparse map from coefficients to cellwise weak divergences."""
    nc = mesh.n_cells
    g = flux_vectors(mesh)
    cols = dof_map.facet_dofs()[mesh.cell_facets]
    rows = np.broadcast_to(np.arange(nc)[:, None, None], cols.shape)
    return sp.csr_matrix((g.ravel(), (rows.ravel(), cols.ravel())), shape=(nc, dof_map.n_dofs))


def jump_operator(mesh: SimplicialMesh, dof_map: DofMap) -> sp.csr_matrix:
    """Sparse map from coefficients to ``Q_b v0 - vb`` per (cell, local facet, component)."""
    d, nc = mesh.dim, mesh.n_cells
    P = centroid_operator(d)
    row_id = np.arange(nc * (d + 1) * d).reshape(nc, d + 1, d)
    idofs = dof_map.interior_dofs()  # (nc, k, a)
    # interior part: row (c,i,a) <- sum_k P[i,k] v0[c,k,a]
    r_int = np.broadcast_to(row_id[:, :, None, :], (nc, d + 1, d + 1, d))
    c_int = np.broadcast_to(idofs[:, None, :, :], (nc, d + 1, d + 1, d))
    v_int = np.broadcast_to(P[None, :, :, None], (nc, d + 1, d + 1, d))
    mask = np.broadcast_to((P != 0)[None, :, :, None], r_int.shape)
    c_fac = dof_map.facet_dofs()[mesh.cell_facets]
    rows = np.concatenate([r_int[mask], row_id.ravel()])
    cols = np.concatenate([c_int[mask], c_fac.ravel()])
    vals = np.concatenate([v_int[mask], -np.ones(row_id.size)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(row_id.size, dof_map.n_dofs))


def _symmetrize(A: sp.spmatrix) -> sp.csr_matrix:
    A = sp.csr_matrix(A)
    S = (A + A.T.tocsr()) * 0.5
    S = sp.csr_matrix(S)
    S.sum_duplicates()
    S.sort_indices()
    return S


def assemble_operators(mesh: SimplicialMesh, dof_map: DofMap, mu: float):
    """Full-DOF pieces of the bilinear form.

    Returns ``(base, div)`` where ``base = mu G'MG + J'WJ`` (symmetric) and
    ``div`` is the weak-divergence operator, so the full matrix is
    ``base + (lam+mu) div' diag(|T|) div``.
    """
    d = mesh.dim
    G = gradient_operator(mesh, dof_map)
    J = jump_operator(mesh, dof_map)
    Bdiv = divergence_operator(mesh, dof_map)
    m_grad = np.repeat(mesh.cell_volume, d * d)
    w_jump = np.repeat((stabilizer_scale(mesh)[:, None] * mesh.cell_facet_measure).ravel(), d)
    base = mu * (G.T @ sp.diags(m_grad) @ G) + J.T @ sp.diags(w_jump) @ J
    return _symmetrize(base), Bdiv


@dataclass(eq=False)
class SparseSystem:
    """Free-DOF system ``matrix @ x = rhs`` with its mixed-form ingredients.

    ``matrix == base + (lam+mu) * div.T @ diag(cell_volume) @ div`` where
    ``div`` is restricted to free columns.  ``div_offset`` is the weak
    divergence of the Dirichlet lift, so the incompressibility constraint of
    the mixed form reads ``div @ x + div_offset = p / (lam+mu)``.
    """

    dof_map: DofMap
    lame: tuple[float, float]
    base: sp.csr_matrix | None = None
    div: sp.csr_matrix | None = None
    cell_volume: np.ndarray | None = None
    rhs_base: np.ndarray | None = None
    div_offset: np.ndarray | None = None
    boundary_values: np.ndarray | None = None
    _matrix: sp.csr_matrix | None = field(default=None, repr=False)
    _rhs: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_matrix(cls, matrix, rhs, dof_map=None, lame=(1.0, 1.0)) -> "SparseSystem":
        """Plain SPD system without mixed-form structure."""
        return cls(dof_map, lame, _matrix=sp.csr_matrix(matrix), _rhs=np.asarray(rhs, dtype=float))

    @property
    def kappa(self) -> float:
        mu, lam = self.lame
        return lam + mu

    @property
    def has_mixed_form(self) -> bool:
        return self.base is not None and self.div is not None

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is not None:
            return self._matrix
        K = self.base + self.kappa * (self.div.T @ sp.diags(self.cell_volume) @ self.div)
        return _symmetrize(K)

    @property
    def rhs(self) -> np.ndarray:
        if self._rhs is not None:
            return self._rhs
        if self.rhs_base is None:
            return np.zeros(self.shape[0])
        return self.rhs_base - self.kappa * (self.div.T @ (self.cell_volume * self.div_offset))

    @property
    def shape(self) -> tuple[int, int]:
        if self._matrix is not None:
            return self._matrix.shape
        return self.base.shape

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if not self.has_mixed_form:
            return self.matrix @ x
        return self.base @ x + self.kappa * (self.div.T @ (self.cell_volume * (self.div @ x)))

    def to_field(self, x: np.ndarray) -> WGField:
        """Embed a free-DOF vector, together with the boundary values, as a field."""
        coeffs = np.zeros(self.dof_map.n_dofs) if self.boundary_values is None else self.boundary_values.copy()
        coeffs[self.dof_map.free] = x
        return WGField(coeffs, self.dof_map)


def assemble_bilinear(mesh: SimplicialMesh, dof_map: DofMap, mu: float, lam: float) -> SparseSystem:
    """Matrix of ``a_s`` on free DOFs (boundary facet DOFs eliminated), zero right-hand side."""
    _check_lame(mu, lam)
    base, Bdiv = assemble_operators(mesh, dof_map, mu)
    free = dof_map.free
    return SparseSystem(
        dof_map=dof_map,
        lame=(float(mu), float(lam)),
        base=_symmetrize(base[free][:, free]),
        div=Bdiv[:, free].tocsr(),
        cell_volume=mesh.cell_volume,
        rhs_base=np.zeros(free.size),
        div_offset=np.zeros(mesh.n_cells),
    )


def local_block(mesh: SimplicialMesh, cell: int, mu: float, lam: float) -> np.ndarray:
    """Dense local matrix of ``a_s`` on one cell.

    DOF order matches :meth:`DofMap.cell_dofs`: the (d+1)*d interior
    coefficients (vertex-major), then the (d+1)*d facet coefficients
    (local-facet-major).
    """
    d = mesh.dim
    n = (d + 1) * d
    vol = mesh.cell_volume[cell]
    g = flux_vectors(mesh)[cell]  # (i, b)
    K = np.zeros((2 * n, 2 * n))
    # weak-gradient and weak-divergence terms act on facet coefficients only
    gram = g @ g.T
    Kbb = mu * vol * np.kron(gram, np.eye(d)) + (lam + mu) * vol * np.outer(g.ravel(), g.ravel())
    K[n:, n:] += Kbb
    # stabilizer: jump = P v0 - vb, per component
    P = centroid_operator(d)
    W = np.diag(mesh.cell_facet_measure[cell] / mesh.cell_diameter[cell])
    L = np.hstack([np.kron(P, np.eye(d)), -np.eye(n)])
    K += L.T @ np.kron(W, np.eye(d)) @ L
    return 0.5 * (K + K.T)


def _cell_rhs_new(mesh, f, degree):
    """(nc, d+1, d) facet contributions ``(int_T f . psi_i) n_i``."""
    d = mesh.dim
    out = np.empty((mesh.n_cells, d + 1, d))
    scale = rt0_basis_scale(mesh)
    for cells in cell_chunks(mesh):
        x, w, _ = cell_points(mesh, degree, cells)
        fx = np.asarray(f(x.reshape(-1, d)), dtype=float).reshape(x.shape)
        p = mesh.vertices[mesh.cells[cells]]  # (c, i, a)
        # int_T f . (x - p_i) = int f.x - (int f) . p_i
        fx_dot_x = np.einsum("cq,cqa,cqa->c", w, fx, x)
        int_f = np.einsum("cq,cqa->ca", w, fx)
        moment = fx_dot_x[:, None] - np.einsum("ca,cia->ci", int_f, p)
        out[cells] = (scale[cells] * moment)[:, :, None] * mesh.outward_normals[cells]
    return out


def _cell_rhs_standard(mesh, f, degree):
    """(nc, d+1, d) nodal moments ``int_T f_a phi_k``."""
    d = mesh.dim
    out = np.empty((mesh.n_cells, d + 1, d))
    for cells in cell_chunks(mesh):
        x, w, bary = cell_points(mesh, degree, cells)
        fx = np.asarray(f(x.reshape(-1, d)), dtype=float).reshape(x.shape)
        out[cells] = np.einsum("cq,qk,cqa->cka", w, bary, fx)
    return out


def assemble_rhs_reconstructed(mesh: SimplicialMesh, dof_map: DofMap, f, quad_degree: int = 4) -> np.ndarray:
    """Load vector of ``(f, R_h v)`` over all DOFs; interior entries are zero."""
    b = np.zeros(dof_map.n_dofs)
    contrib = _cell_rhs_new(mesh, f, quad_degree)
    np.add.at(b, dof_map.facet_dofs()[mesh.cell_facets], contrib)
    return b


def assemble_rhs_standard(mesh: SimplicialMesh, dof_map: DofMap, f, quad_degree: int = 4) -> np.ndarray:
    """Load vector of ``(f, v0)`` over all DOFs; facet entries are zero."""
    b = np.zeros(dof_map.n_dofs)
    b[: dof_map.n_interior] = _cell_rhs_standard(mesh, f, quad_degree).ravel()
    return b


def assemble_system(
    mesh: SimplicialMesh,
    dof_map: DofMap,
    mu: float,
    lam: float,
    f,
    algorithm: str = "new",
    quad_degree: int = 4,
    boundary=None,
    boundary_degree: int = 6,
) -> SparseSystem:
    """Assemble the free-DOF system for one of the two WG schemes.

    ``boundary`` is an optional callable giving Dirichlet data; boundary
    facet coefficients are set to its facet averages and lifted to the
    right-hand side.  ``None`` means homogeneous data.
    """
    _check_lame(mu, lam)
    if algorithm == "new":
        b = assemble_rhs_reconstructed(mesh, dof_map, f, quad_degree)
    elif algorithm == "standard":
        b = assemble_rhs_standard(mesh, dof_map, f, quad_degree)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")

    base_full, Bdiv = assemble_operators(mesh, dof_map, mu)
    free = dof_map.free
    g = np.zeros(dof_map.n_dofs)
    if boundary is not None:
        gb = project_Qb(mesh, boundary, boundary_degree)
        fd = dof_map.facet_dofs()
        bnd = mesh.facet_boundary
        g[fd[bnd]] = gb[bnd]
    rhs_base = b[free] - (base_full @ g)[free]
    div_offset = Bdiv @ g
    return SparseSystem(
        dof_map=dof_map,
        lame=(float(mu), float(lam)),
        base=_symmetrize(base_full[free][:, free]),
        div=Bdiv[:, free].tocsr(),
        cell_volume=mesh.cell_volume,
        rhs_base=rhs_base,
        div_offset=div_offset,
        boundary_values=g,
    )
