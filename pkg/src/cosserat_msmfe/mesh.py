"""Conforming simplicial meshes of the unit square and cube.

A :class:`Mesh` stores vertex coordinates and positively oriented cells
together with the facet topology needed by H(div) elements: deduplicated
facets, the cell-to-facet incidence with orientation signs, and boundary
flags.

Global facet normals point from the lower-indexed incident cell towards
the higher-indexed one; on the boundary they point outward.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for invalid mesh input."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial mesh with facet topology.

    Attributes
    ----------
    points : (nv, d) array
        Vertex coordinates.
    cells : (nc, d+1) int array
        Vertex indices, ordered so that every cell has positive volume.
    facets : (nf, d) int array
        Sorted vertex indices of each facet.
    cell_facets : (nc, d+1) int array
        ``cell_facets[c, k]`` is the facet opposite local vertex ``k``.
    cell_facet_signs : (nc, d+1) int array
        +1 where the global facet normal is the outward normal of the cell.
    facet_cells : (nf, 2) int array
        Incident cells, lower index first; ``-1`` marks a missing neighbour.
    barycentric : bool
        True if the mesh was produced by :func:`barycentric_subdivide`.
    """

    points: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    cell_facets: np.ndarray
    cell_facet_signs: np.ndarray
    facet_cells: np.ndarray
    barycentric: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def num_vertices(self) -> int:
        return self.points.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def num_facets(self) -> int:
        return self.facets.shape[0]

    @property
    def boundary_facets(self) -> np.ndarray:
        return self.facet_cells[:, 1] < 0

    @property
    def jacobians(self) -> np.ndarray:
        """(nc, d, d) affine maps; column k is ``x_{k+1} - x_0``."""
        if "jac" not in self._cache:
            x = self.points[self.cells]
            self._cache["jac"] = np.transpose(x[:, 1:] - x[:, :1], (0, 2, 1))
        return self._cache["jac"]

    @property
    def determinants(self) -> np.ndarray:
        if "det" not in self._cache:
            self._cache["det"] = np.linalg.det(self.jacobians)
        return self._cache["det"]

    @property
    def volumes(self) -> np.ndarray:
        return self.determinants / factorial(self.dim)

    @property
    def diameters(self) -> np.ndarray:
        if "diam" not in self._cache:
            x = self.points[self.cells]
            diam = np.zeros(self.num_cells)
            for i, j in itertools.combinations(range(self.dim + 1), 2):
                diam = np.maximum(diam, np.linalg.norm(x[:, i] - x[:, j], axis=1))
            self._cache["diam"] = diam
        return self._cache["diam"]

    @property
    def h(self) -> float:
        """Mesh size, the largest cell diameter."""
        return float(self.diameters.max())

    @property
    def centroids(self) -> np.ndarray:
        return self.points[self.cells].mean(axis=1)

    def map_points(self, bary: np.ndarray, cells=None) -> np.ndarray:
        """Physical coordinates of barycentric points, shape (nc, nq, d)."""
        x = self.points[self.cells if cells is None else self.cells[cells]]
        return np.einsum("qk,ckd->cqd", bary, x)

    def vertex_facet_counts(self) -> np.ndarray:
        """Number of facets containing each vertex."""
        return np.bincount(self.facets.ravel(), minlength=self.num_vertices)

    def summary(self) -> dict:
        return {
            "dim": self.dim,
            "vertices": self.num_vertices,
            "cells": self.num_cells,
            "facets": self.num_facets,
            "boundary_facets": int(self.boundary_facets.sum()),
            "h": self.h,
            "volume": float(self.volumes.sum()),
            "barycentric": self.barycentric,
        }


def compute_topology(points, cells, barycentric: bool = False) -> Mesh:
    """Build facets, incidence, orientation signs and boundary flags.

    Cells with negative orientation are reordered in place of the caller's
    copy by swapping their last two vertices.
    """
    points = np.ascontiguousarray(points, dtype=float)
    cells = np.array(cells, dtype=np.int64)
    if cells.ndim != 2 or points.ndim != 2 or cells.shape[1] != points.shape[1] + 1:
        raise MeshError("cells must have d+1 vertices for d-dimensional points")
    d = points.shape[1]
    if d not in (2, 3):
        raise MeshError(f"unsupported dimension {d}")
    srt = np.sort(cells, axis=1)
    if np.any(srt[:, 1:] == srt[:, :-1]):
        raise MeshError("inconsistent cell: repeated vertex index")

    x = points[cells]
    det = np.linalg.det(np.transpose(x[:, 1:] - x[:, :1], (0, 2, 1)))
    scale = np.max(np.ptp(points, axis=0)) ** d if len(points) else 1.0
    if np.any(np.abs(det) <= 1e-14 * scale):
        raise MeshError("degenerate cell with zero measure")
    neg = det < 0
    cells[neg, -2], cells[neg, -1] = cells[neg, -1], cells[neg, -2].copy()

    nc = cells.shape[0]
    # local facet k is opposite local vertex k
    local = np.array([[j for j in range(d + 1) if j != k] for k in range(d + 1)])
    all_facets = np.sort(cells[:, local], axis=2).reshape(-1, d)
    facets, first, inverse = np.unique(
        all_facets, axis=0, return_index=True, return_inverse=True
    )
    inverse = inverse.ravel()
    # renumber facets by first appearance for a cell-ordered numbering
    order = np.argsort(first, kind="stable")
    renum = np.empty_like(order)
    renum[order] = np.arange(order.size)
    facets = facets[order]
    cell_facets = renum[inverse].reshape(nc, d + 1)

    owner = np.repeat(np.arange(nc), d + 1)
    flat = cell_facets.ravel()
    counts = np.bincount(flat, minlength=facets.shape[0])
    if np.any(counts > 2):
        raise MeshError("non-manifold mesh: facet shared by more than two cells")
    facet_cells = -np.ones((facets.shape[0], 2), dtype=np.int64)
    srt_idx = np.lexsort((owner, flat))
    f_sorted = flat[srt_idx]
    c_sorted = owner[srt_idx]
    is_first = np.ones(f_sorted.size, dtype=bool)
    is_first[1:] = f_sorted[1:] != f_sorted[:-1]
    facet_cells[f_sorted[is_first], 0] = c_sorted[is_first]
    facet_cells[f_sorted[~is_first], 1] = c_sorted[~is_first]

    signs = np.where(facet_cells[cell_facets, 0] == np.arange(nc)[:, None], 1, -1)
    return Mesh(
        points=points,
        cells=cells,
        facets=facets,
        cell_facets=cell_facets,
        cell_facet_signs=signs.astype(np.int64),
        facet_cells=facet_cells,
        barycentric=barycentric,
    )


def _check_n(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 3 or n % 3 != 0:
        raise MeshError(
            f"n={n}: grid parameter must be a positive multiple of 3 so that "
            "grid lines conform to x1 = 1/3 and x1 = 2/3"
        )


def build_structured_square(n: int) -> Mesh:
    """Unit square split into n x n squares, each cut along the
    lower-left to upper-right diagonal."""
    _check_n(n)
    t = np.arange(n + 1) / n
    X, Y = np.meshgrid(t, t, indexing="xy")
    points = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return compute_topology(points, cells)


def build_structured_cube(n: int) -> Mesh:
    """Unit cube split into n^3 subcubes, each cut into 6 Kuhn tetrahedra."""
    _check_n(n)
    t = np.arange(n + 1) / n
    X, Y, Z = np.meshgrid(t, t, t, indexing="ij")
    points = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    i, j, k = (a.ravel() for a in np.meshgrid(*(np.arange(n),) * 3, indexing="ij"))
    base = np.stack([i, j, k], axis=1)
    tets = []
    for perm in itertools.permutations(range(3)):
        corner = base.copy()
        verts = [vid(*corner.T)]
        for axis in perm:
            corner = corner.copy()
            corner[:, axis] += 1
            verts.append(vid(*corner.T))
        tets.append(np.stack(verts, axis=1))
    cells = np.stack(tets, axis=1).reshape(-1, 4)
    return compute_topology(points, cells)


def barycentric_subdivide(mesh: Mesh) -> Mesh:
    """Alfeld split: connect each cell's barycenter to its facets.

    Parent vertices keep their indices; barycenters are appended in cell
    order. Each cell yields ``d + 1`` children, child ``k`` replacing
    vertex ``k`` of the parent by the barycenter.
    """
    d = mesh.dim
    nv, nc = mesh.num_vertices, mesh.num_cells
    points = np.vstack([mesh.points, mesh.centroids])
    centers = nv + np.arange(nc)
    children = np.repeat(mesh.cells[:, None, :], d + 1, axis=1)
    for k in range(d + 1):
        children[:, k, k] = centers
    return compute_topology(points, children.reshape(-1, d + 1), barycentric=True)


# msh 2.2 element type codes
_SIMPLEX_TYPES = {15: 0, 1: 1, 2: 2, 4: 3}
_NODES_PER_TYPE = {15: 1, 1: 2, 2: 3, 4: 4}


def _read_section(lines, start, name):
    if start >= len(lines) or lines[start].strip() != f"${name}":
        raise MeshError(f"malformed section header: expected ${name}")
    try:
        end = lines.index(f"$End{name}", start)
    except ValueError:
        raise MeshError(f"malformed section: missing $End{name}") from None
    return lines[start + 1 : end], end + 1


def import_simplicial(path, dim: int | None = None) -> Mesh:
    """Read an ASCII msh 2.2 file with triangles or tetrahedra.

    Only the ``$MeshFormat``, ``$Nodes`` and ``$Elements`` sections are
    interpreted; other sections are skipped. Lower-dimensional simplices
    (points, lines, boundary triangles of a tetrahedral mesh) are ignored.
    Vertices not referenced by any top-dimensional cell are dropped.

    Parameters
    ----------
    path : str or Path
        File to read.
    dim : int, optional
        Expected mesh dimension; a mismatch raises :class:`MeshError`.
    """
    text = Path(path).read_text()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    fmt, pos = _read_section(lines, 0, "MeshFormat")
    parts = fmt[0].split() if fmt else []
    if len(parts) < 2 or not parts[0].startswith("2") or parts[1] != "0":
        raise MeshError("only ASCII msh version 2.x files are supported")

    node_lines = elem_lines = None
    while pos < len(lines):
        head = lines[pos]
        if not head.startswith("$"):
            raise MeshError(f"malformed section header: {head!r}")
        name = head[1:]
        body, pos = _read_section(lines, pos, name)
        if name == "Nodes":
            node_lines = body
        elif name == "Elements":
            elem_lines = body
    if node_lines is None or elem_lines is None:
        raise MeshError("file must contain $Nodes and $Elements sections")

    try:
        nn = int(node_lines[0])
        raw = np.array([ln.split() for ln in node_lines[1 : nn + 1]], dtype=float)
    except (ValueError, IndexError):
        raise MeshError("malformed $Nodes section") from None
    if raw.shape != (nn, 4):
        raise MeshError("malformed $Nodes section")
    node_ids = raw[:, 0].astype(np.int64)
    coords = raw[:, 1:]
    id_to_row = {nid: i for i, nid in enumerate(node_ids)}

    by_dim: dict[int, list] = {}
    ne = int(elem_lines[0])
    for ln in elem_lines[1 : ne + 1]:
        tok = [int(t) for t in ln.split()]
        etype, ntags = tok[1], tok[2]
        if etype not in _SIMPLEX_TYPES:
            raise MeshError(f"non-simplex element (type {etype})")
        nodes = tok[3 + ntags :]
        if len(nodes) != _NODES_PER_TYPE[etype]:
            raise MeshError("malformed $Elements entry")
        try:
            by_dim.setdefault(_SIMPLEX_TYPES[etype], []).append(
                [id_to_row[v] for v in nodes]
            )
        except KeyError:
            raise MeshError("element references an undefined node") from None

    top = max((k for k in by_dim if k >= 2), default=None)
    if top is None:
        raise MeshError("no triangles or tetrahedra found")
    if dim is not None and dim != top:
        raise MeshError(f"dimension mismatch: file has {top}D cells, expected {dim}D")
    if top == 2 and np.any(coords[:, 2] != 0.0):
        raise MeshError("dimension mismatch: triangles with non-planar z coordinates")

    cells = np.array(by_dim[top], dtype=np.int64)
    used, cells = np.unique(cells, return_inverse=True)
    cells = cells.reshape(-1, top + 1)
    return compute_topology(coords[used, :top], cells)


def write_msh(mesh: Mesh, path) -> None:
    """Write ``mesh`` as ASCII msh 2.2 (inverse of :func:`import_simplicial`)."""
    d = mesh.dim
    etype = 2 if d == 2 else 4
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.num_vertices)]
    pts = np.zeros((mesh.num_vertices, 3))
    pts[:, :d] = mesh.points
    out += [f"{i + 1} {x:.17g} {y:.17g} {z:.17g}" for i, (x, y, z) in enumerate(pts)]
    out += ["$EndNodes", "$Elements", str(mesh.num_cells)]
    out += [
        f"{c + 1} {etype} 2 0 0 " + " ".join(str(v + 1) for v in cell)
        for c, cell in enumerate(mesh.cells)
    ]
    out.append("$EndElements")
    Path(path).write_text("\n".join(out) + "\n")
