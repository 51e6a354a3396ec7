"""Structured simplicial meshes of the unit square and unit cube.

Cells are stored as (d+1)-tuples of vertex indices.  Local facet ``i`` of a
cell is the facet opposite local vertex ``i``; every per-(cell, local facet)
array in this module follows that convention.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for invalid mesh parameters or degenerate geometry."""


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    """Simplicial partition of (0,1)^d with full cell-facet connectivity.

    All arrays are read-only after construction.

    Attributes
    ----------
    dim : int
        Spatial dimension, 2 or 3.
    vertices : (nv, d) float array
    cells : (nc, d+1) int array
    facets : (nf, d) int array
        Sorted vertex tuples, each facet stored once.
    cell_facets : (nc, d+1) int array
        ``cell_facets[t, i]`` is the facet opposite local vertex ``i``.
    facet_boundary : (nf,) bool array
    cell_volume : (nc,) float array
    facet_measure : (nf,) float array
    outward_normals : (nc, d+1, d) float array
        Unit outward normal of local facet ``i`` with respect to cell ``t``.
    cell_diameter : (nc,) float array
        Longest edge of each cell.
    facet_centroid : (nf, d) float array
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    cell_facets: np.ndarray
    facet_boundary: np.ndarray
    cell_volume: np.ndarray
    facet_measure: np.ndarray
    outward_normals: np.ndarray
    cell_diameter: np.ndarray
    facet_centroid: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def n_facets(self) -> int:
        return self.facets.shape[0]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def cell_facet_measure(self) -> np.ndarray:
        """(nc, d+1) measures of each cell's local facets."""
        return self.facet_measure[self.cell_facets]

    @property
    def cell_vertices(self) -> np.ndarray:
        """(nc, d+1, d) vertex coordinates per cell."""
        return self.vertices[self.cells]

    def facet_sharing_counts(self) -> np.ndarray:
        return np.bincount(self.cell_facets.ravel(), minlength=self.n_facets)

    def dump(self, path: str | Path) -> None:
        """Write vertices then cells as plain text (debugging aid)."""
        with open(path, "w") as fh:
            fh.write(f"{self.n_vertices} {self.n_cells} {self.dim}\n")
            np.savetxt(fh, self.vertices, fmt="%.17g")
            np.savetxt(fh, self.cells, fmt="%d")


def _local_facet_vertices(d: int) -> np.ndarray:
    # row i lists the local vertices of the facet opposite vertex i
    return np.array([[k for k in range(d + 1) if k != i] for i in range(d + 1)])


def from_cells(vertices: np.ndarray, cells: np.ndarray) -> SimplicialMesh:
    """Build connectivity and geometry for a conforming simplicial mesh."""
    vertices = np.ascontiguousarray(vertices, dtype=float)
    cells = np.ascontiguousarray(cells, dtype=np.int64)
    nc, npc = cells.shape
    d = npc - 1
    if vertices.shape[1] != d or d not in (2, 3):
        raise MeshError(f"unsupported cell shape {cells.shape} for {vertices.shape[1]}-d vertices")

    xc = vertices[cells]
    jac = xc[:, 1:, :] - xc[:, :1, :]  # rows p_k - p_0
    det = np.linalg.det(jac)
    if np.any(np.abs(det) <= 1e-14 * np.max(np.abs(det))):
        raise MeshError("degenerate cell")
    # make every cell positively oriented
    neg = det < 0
    if np.any(neg):
        cells = cells.copy()
        cells[neg, 1], cells[neg, 2] = cells[neg, 2].copy(), cells[neg, 1].copy()
        xc = vertices[cells]
        jac = xc[:, 1:, :] - xc[:, :1, :]
        det = np.linalg.det(jac)
    volume = det / factorial(d)

    # barycentric gradients: rows of inv(jac)^T give grad lambda_1..d
    inv = np.linalg.inv(jac)
    grad = np.empty((nc, d + 1, d))
    grad[:, 1:, :] = np.transpose(inv, (0, 2, 1))
    grad[:, 0, :] = -grad[:, 1:, :].sum(axis=1)
    normals = -grad / np.linalg.norm(grad, axis=2, keepdims=True)

    lf = _local_facet_vertices(d)
    keys = np.sort(cells[:, lf], axis=2).reshape(-1, d)
    facets, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    cell_facets = inverse.reshape(nc, d + 1)
    if np.any(counts > 2):
        raise MeshError("non-manifold facet shared by more than two cells")
    facet_boundary = counts == 1

    fx = vertices[facets]
    if d == 2:
        measure = np.linalg.norm(fx[:, 1] - fx[:, 0], axis=1)
    else:
        measure = 0.5 * np.linalg.norm(np.cross(fx[:, 1] - fx[:, 0], fx[:, 2] - fx[:, 0]), axis=1)
    centroid = fx.mean(axis=1)

    pairs = np.array(list(itertools.combinations(range(d + 1), 2)))
    edges = xc[:, pairs[:, 1], :] - xc[:, pairs[:, 0], :]
    diameter = np.linalg.norm(edges, axis=2).max(axis=1)

    arrays = [vertices, cells, facets, cell_facets, facet_boundary, volume,
              measure, normals, diameter, centroid]
    for a in arrays:
        a.setflags(write=False)
    return SimplicialMesh(d, vertices, cells, facets, cell_facets, facet_boundary,
                          volume, measure, normals, diameter, centroid)


def build_uniform_triangle_mesh(n: int) -> SimplicialMesh:
    """n x n squares on (0,1)^2, each cut along its lower-left/upper-right diagonal."""
    if int(n) != n or n < 1:
        raise MeshError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    ll = i * (n + 1) + j
    lr = (i + 1) * (n + 1) + j
    ur = lr + 1
    ul = ll + 1
    cells = np.concatenate([np.column_stack([ll, lr, ur]), np.column_stack([ll, ur, ul])])
    return from_cells(vertices, cells)


def build_uniform_tet_mesh(level: int) -> SimplicialMesh:
    """Kuhn (Freudenthal) tetrahedralization with 2**(level-1) cubes per side.

    Each cube is split into the six tetrahedra sharing its main diagonal
    (0,0,0)-(1,1,1); every cube uses the same split, so the mesh is conforming.
    """
    if int(level) != level or level < 1:
        raise MeshError(f"level must be a positive integer, got {level!r}")
    n = 2 ** (int(level) - 1)
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y, Z = np.meshgrid(t, t, t, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    i, j, k = (a.ravel() for a in np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij"))
    blocks = []
    for perm in itertools.permutations(range(3)):
        corner = np.zeros(3, dtype=int)
        path = [vid(i, j, k)]
        for axis in perm:
            corner[axis] = 1
            path.append(vid(i + corner[0], j + corner[1], k + corner[2]))
        blocks.append(np.column_stack(path))
    return from_cells(vertices, np.concatenate(blocks))


def mesh_size(mesh: SimplicialMesh) -> float:
    """Largest cell diameter."""
    return float(mesh.cell_diameter.max())
