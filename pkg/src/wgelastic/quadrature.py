"""Quadrature on reference simplices and their affine images.

Simplex rules are conical (collapsed) products of Gauss-Jacobi rules, so all
weights are positive and any degree is reachable; segments use Gauss-Legendre.
Reference elements are the unit segment [0,1], the triangle
{(0,0),(1,0),(0,1)} and the tetrahedron with vertices 0, e1, e2, e3.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 6


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, dim) reference coordinates
    weights: np.ndarray  # (nq,), sum to the reference measure
    exact_degree: int

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def barycentric(self) -> np.ndarray:
        """(nq, dim+1) barycentric coordinates; column 0 belongs to the origin vertex."""
        return np.column_stack([1.0 - self.points.sum(axis=1), self.points])

    @property
    def reference_measure(self) -> float:
        return 1.0 / factorial(self.dim)


def _check_degree(degree: int) -> int:
    if int(degree) != degree or not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree!r} (1..{MAX_DEGREE})")
    return int(degree)


def _gauss_jacobi01(n: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes/weights on [0,1] for weight (1-s)^alpha
    if alpha == 0:
        x, w = roots_legendre(n)
    else:
        x, w = roots_jacobi(n, alpha, 0.0)
    return (1.0 + x) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_rule(dim: int, degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi rule on the reference ``dim``-simplex (dim 1, 2 or 3)."""
    degree = _check_degree(degree)
    n = degree // 2 + 1
    if dim == 1:
        s, w = _gauss_jacobi01(n, 0)
        pts, wts = s[:, None], w
    elif dim == 2:
        s, ws = _gauss_jacobi01(n, 1)
        t, wt = _gauss_jacobi01(n, 0)
        S, T = np.meshgrid(s, t, indexing="ij")
        pts = np.column_stack([S.ravel(), (T * (1 - S)).ravel()])
        wts = np.outer(ws, wt).ravel()
    elif dim == 3:
        s, ws = _gauss_jacobi01(n, 2)
        t, wt = _gauss_jacobi01(n, 1)
        r, wr = _gauss_jacobi01(n, 0)
        S, T, R = np.meshgrid(s, t, r, indexing="ij")
        pts = np.column_stack([S.ravel(), (T * (1 - S)).ravel(), (R * (1 - S) * (1 - T)).ravel()])
        wts = (ws[:, None, None] * wt[None, :, None] * wr[None, None, :]).ravel()
    else:
        raise ValueError(f"unsupported simplex dimension {dim!r}")
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, degree)


def cell_rule(dim: int, degree: int) -> QuadratureRule:
    if dim not in (2, 3):
        raise ValueError(f"cell dimension must be 2 or 3, got {dim!r}")
    return simplex_rule(dim, degree)


def facet_rule(dim: int, degree: int) -> QuadratureRule:
    """Rule on the facet reference element of a ``dim``-dimensional mesh."""
    if dim not in (2, 3):
        raise ValueError(f"mesh dimension must be 2 or 3, got {dim!r}")
    return simplex_rule(dim - 1, degree)


def cell_points(mesh, degree: int, cells=None):
    """Physical quadrature points and weights on (a subset of) cells.

    Returns ``(x, w, bary)`` with ``x`` of shape (nc, nq, d), ``w`` of shape
    (nc, nq) already scaled by the affine Jacobian, and ``bary`` the (nq, d+1)
    barycentric coordinates of the reference points (shared by all cells,
    ordered like the cell's vertices).
    """
    rule = cell_rule(mesh.dim, degree)
    idx = slice(None) if cells is None else cells
    bary = rule.barycentric
    xv = mesh.vertices[mesh.cells[idx]]
    x = np.einsum("qk,ckd->cqd", bary, xv)
    jac = mesh.cell_volume[idx] / rule.reference_measure
    w = jac[:, None] * rule.weights[None, :]
    return x, w, bary


def facet_points(mesh, degree: int, facets=None):
    """Physical quadrature points (nf, nq, d) and weights (nf, nq) on facets."""
    rule = facet_rule(mesh.dim, degree)
    idx = slice(None) if facets is None else facets
    bary = rule.barycentric
    xv = mesh.vertices[mesh.facets[idx]]
    x = np.einsum("qk,fkd->fqd", bary, xv)
    jac = mesh.facet_measure[idx] / rule.reference_measure
    return x, jac[:, None] * rule.weights[None, :]


def _evaluate(f, x):
    flat = x.reshape(-1, x.shape[-1])
    val = np.asarray(f(flat), dtype=float)
    return val.reshape(x.shape[:-1] + val.shape[1:])


def integrate_on_cell(mesh, cell: int, f, degree: int = MAX_DEGREE):
    """Integral of ``f`` over one cell.

    ``f`` maps an (m, d) array of points to an (m,) or (m, k) array.
    """
    x, w, _ = cell_points(mesh, degree, cells=np.array([cell]))
    val = _evaluate(f, x[0])
    return np.tensordot(w[0], val, axes=(0, 0))


CHUNK = 16384


def cell_chunks(mesh, chunk: int = CHUNK):
    """Yield index arrays covering all cells in blocks of ``chunk``."""
    for start in range(0, mesh.n_cells, chunk):
        yield np.arange(start, min(start + chunk, mesh.n_cells))


def integrate_cells(mesh, f, degree: int = MAX_DEGREE) -> np.ndarray:
    """Per-cell integrals of ``f``, shape (nc,) or (nc, k)."""
    out = []
    for cells in cell_chunks(mesh):
        x, w, _ = cell_points(mesh, degree, cells)
        out.append(np.einsum("cq,cq...->c...", w, _evaluate(f, x)))
    return np.concatenate(out)


def integrate_facets(mesh, f, degree: int = MAX_DEGREE) -> np.ndarray:
    """Per-facet integrals of ``f``, shape (nf,) or (nf, k)."""
    x, w = facet_points(mesh, degree)
    val = _evaluate(f, x)
    return np.einsum("fq,fq...->f...", w, val)
