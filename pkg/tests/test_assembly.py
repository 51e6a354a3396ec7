import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from wgelastic.assembly import (
    assemble_bilinear,
    assemble_operators,
    assemble_rhs_reconstructed,
    assemble_rhs_standard,
    assemble_system,
    local_block,
)
from wgelastic.mesh import build_uniform_tet_mesh, build_uniform_triangle_mesh, from_cells
from wgelastic.solver import solve_spd
from wgelastic.wg import DofMap, project_Qh, triple_norm

REF_TRIANGLE = from_cells(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


def global_from_local_blocks(mesh, mu, lam):
    """Dense full-DOF matrix scattered from the per-cell dense blocks."""
    dm = DofMap.from_mesh(mesh)
    A = np.zeros((dm.n_dofs, dm.n_dofs))
    for t, dofs in enumerate(dm.cell_dofs(mesh)):
        A[np.ix_(dofs, dofs)] += local_block(mesh, t, mu, lam)
    return A


def is_positive_definite(A):
    """Unpivoted symmetric LU: its pivots are the LDL' diagonal."""
    lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    return bool(np.all(lu.U.diagonal() > 0))


@pytest.mark.parametrize("mesh", [build_uniform_triangle_mesh(3), build_uniform_tet_mesh(2)], ids=["tri", "tet"])
@pytest.mark.parametrize("mu,lam", [(1.0, 1.0), (0.5, 1e4)])
def test_sparse_assembly_matches_local_blocks(mesh, mu, lam):
    dm = DofMap.from_mesh(mesh)
    base, Bdiv = assemble_operators(mesh, dm, mu)
    K = base + (lam + mu) * Bdiv.T @ sp.diags(mesh.cell_volume) @ Bdiv
    A = global_from_local_blocks(mesh, mu, lam)
    assert np.abs(K.toarray() - A).max() <= 1e-10 * np.abs(A).max()
    system = assemble_bilinear(mesh, dm, mu, lam)
    free = dm.free
    assert np.abs(system.matrix.toarray() - A[np.ix_(free, free)]).max() <= 1e-10 * np.abs(A).max()


def test_local_blocks_are_psd():
    mesh = build_uniform_tet_mesh(2)
    for t in range(0, mesh.n_cells, 5):
        K = local_block(mesh, t, 1.0, 1e3)
        assert np.array_equal(K, K.T)
        assert np.linalg.eigvalsh(K).min() > -1e-9 * np.abs(K).max()


@pytest.mark.parametrize("lam", [1.0, 1e8])
def test_matrix_exactly_symmetric(lam):
    for mesh in (build_uniform_triangle_mesh(6), build_uniform_tet_mesh(2)):
        A = assemble_bilinear(mesh, DofMap.from_mesh(mesh), 1.3, lam).matrix
        assert abs(A - A.T).max() == 0.0


@pytest.mark.parametrize("mu,lam", [(1.0, 1.0), (1.0, 1e8), (0.25, 10.0), (3.0, 1.0)])
def test_coercivity_against_independent_norm(mu, lam):
    rng = np.random.default_rng(7)
    for mesh in (build_uniform_triangle_mesh(4), build_uniform_tet_mesh(2)):
        system = assemble_bilinear(mesh, DofMap.from_mesh(mesh), mu, lam)
        A = system.matrix
        for _ in range(100):
            x = rng.standard_normal(A.shape[0])
            assert x @ (A @ x) >= min(mu, 1.0) * triple_norm(mesh, system.to_field(x)) ** 2 * (1 - 1e-12)


@pytest.mark.parametrize("n", [8, 16, 32])
@pytest.mark.parametrize("lam", [1.0, 1e4, 1e8])
def test_spd_on_test_meshes(n, lam):
    mesh = build_uniform_triangle_mesh(n)
    assert is_positive_definite(assemble_bilinear(mesh, DofMap.from_mesh(mesh), 1.0, lam).matrix)


def test_spd_3d():
    mesh = build_uniform_tet_mesh(3)
    assert is_positive_definite(assemble_bilinear(mesh, DofMap.from_mesh(mesh), 1.0, 1e8).matrix)


def test_stabilizer_vanishes_on_linear_fields():
    mesh = build_uniform_triangle_mesh(4)
    mu, lam = 1.5, 2.0
    A = global_from_local_blocks(mesh, mu, lam)
    G = np.array([[1.0, 2.0], [3.0, -1.0]])
    v = project_Qh(mesh, lambda x: x @ G.T + 1.0).coeffs
    # no jumps, exact weak gradient: energy = mu |G|^2 + (lam+mu) tr(G)^2 over the unit square
    assert v @ A @ v == pytest.approx(mu * (G**2).sum() + (lam + mu) * np.trace(G) ** 2, rel=1e-12)


def test_sparsity_follows_cell_adjacency():
    mesh = build_uniform_triangle_mesh(3)
    dm = DofMap.from_mesh(mesh)
    allowed = np.zeros((dm.n_dofs, dm.n_dofs), dtype=bool)
    for dofs in dm.cell_dofs(mesh):
        allowed[np.ix_(dofs, dofs)] = True
    A = global_from_local_blocks(mesh, 1.0, 1.0)
    assert not np.any((A != 0) & ~allowed)
    # interior DOFs of different cells never couple
    inner = dm.interior_dofs().reshape(mesh.n_cells, -1)
    for t in range(mesh.n_cells):
        others = np.setdiff1d(inner.ravel(), inner[t])
        assert not np.any(A[np.ix_(inner[t], others)])


def test_rejects_nonpositive_lame_parameters():
    mesh = build_uniform_triangle_mesh(2)
    dm = DofMap.from_mesh(mesh)
    with pytest.raises(ValueError):
        assemble_bilinear(mesh, dm, 0.0, 1.0)
    with pytest.raises(ValueError):
        assemble_bilinear(mesh, dm, 1.0, -1.0)
    with pytest.raises(ValueError):
        assemble_system(mesh, dm, 1.0, 1.0, lambda x: np.zeros_like(x), algorithm="other")


# -- right-hand sides ------------------------------------------------------------

def test_zero_load_gives_zero_rhs():
    mesh = build_uniform_tet_mesh(2)
    dm = DofMap.from_mesh(mesh)
    zero = lambda x: np.zeros_like(x)  # noqa: E731
    assert not assemble_rhs_reconstructed(mesh, dm, zero).any()
    assert not assemble_rhs_standard(mesh, dm, zero).any()


def test_reconstructed_rhs_constant_load_on_reference_triangle():
    mesh = REF_TRIANGLE
    dm = DofMap.from_mesh(mesh)
    c = np.array([2.0, -3.0])
    b = assemble_rhs_reconstructed(mesh, dm, lambda x: np.tile(c, (len(x), 1)))
    assert not b[: dm.n_interior].any()
    centroid = mesh.vertices.mean(axis=0)
    fd = dm.facet_dofs()
    for i in range(3):
        p_i = mesh.vertices[mesh.cells[0, i]]
        e_i = mesh.cell_facet_measure[0, i]
        expected = c @ (e_i / 2 * (centroid - p_i)) * mesh.outward_normals[0, i]
        assert np.allclose(b[fd[mesh.cell_facets[0, i]]], expected, atol=1e-14)


def test_standard_rhs_unit_load_on_reference_triangle():
    dm = DofMap.from_mesh(REF_TRIANGLE)
    b = assemble_rhs_standard(REF_TRIANGLE, dm, lambda x: np.column_stack([np.ones(len(x)), np.zeros(len(x))]))
    inner = b[dm.interior_dofs()][0]
    assert np.allclose(inner[:, 0], 1 / 6, atol=1e-15)
    assert not inner[:, 1].any()
    assert not b[dm.n_interior:].any()


def test_reconstructed_rhs_matches_rt0_pairing():
    # (f, R_T v) computed from the RHS vector equals a direct quadrature of f . R_T v
    from wgelastic.quadrature import integrate_on_cell
    from wgelastic.wg import WGField, rt0_basis_scale, rt0_coefficients

    mesh = build_uniform_triangle_mesh(3)
    dm = DofMap.from_mesh(mesh)
    f = lambda x: np.column_stack([np.sin(3 * x[:, 0]), x[:, 0] * x[:, 1]])  # noqa: E731
    b = assemble_rhs_reconstructed(mesh, dm, f, quad_degree=6)
    v = WGField(np.random.default_rng(2).standard_normal(dm.n_dofs), dm)
    coeffs = rt0_coefficients(mesh, v) * rt0_basis_scale(mesh)
    p = mesh.vertices[mesh.cells]
    total = 0.0
    for t in range(mesh.n_cells):
        def integrand(x, t=t):
            rt = coeffs[t].sum() * x - coeffs[t] @ p[t]
            return (f(x) * rt).sum(axis=1)
        total += integrate_on_cell(mesh, t, integrand, 6)
    assert b @ v.coeffs == pytest.approx(total, rel=1e-12)


# -- consistency of the assembled system -----------------------------------------

@pytest.mark.parametrize("algorithm", ["new", "standard"])
@pytest.mark.parametrize("mesh", [build_uniform_triangle_mesh(4), build_uniform_tet_mesh(2)], ids=["tri", "tet"])
def test_linear_patch_test(algorithm, mesh):
    """A globally linear displacement with zero load is reproduced exactly."""
    d = mesh.dim
    G = np.arange(1.0, 1.0 + d * d).reshape(d, d) / 3.0
    u = lambda x: x @ G.T + 0.25  # noqa: E731
    dm = DofMap.from_mesh(mesh)
    system = assemble_system(mesh, dm, 1.0, 1e3, lambda x: np.zeros_like(x), algorithm, boundary=u)
    x, _ = solve_spd(system, method="mixed-direct")
    uh = system.to_field(x)
    assert np.abs(uh.coeffs - project_Qh(mesh, u, dof_map=dm).coeffs).max() < 1e-9


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=-50, max_value=50).filter(lambda s: abs(s) > 1e-3))
def test_solution_scales_linearly_with_load(scale):
    mesh = build_uniform_triangle_mesh(4)
    dm = DofMap.from_mesh(mesh)
    f = lambda x: np.column_stack([np.sin(np.pi * x[:, 0]), x[:, 1] ** 2])  # noqa: E731
    base = assemble_system(mesh, dm, 1.0, 10.0, f)
    scaled = assemble_system(mesh, dm, 1.0, 10.0, lambda x: scale * f(x))
    x1, _ = solve_spd(base)
    x2, _ = solve_spd(scaled)
    assert np.allclose(x2, scale * x1, rtol=1e-9, atol=1e-12 * abs(scale))
