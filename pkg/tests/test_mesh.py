import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cosserat_msmfe.mesh import (
    MeshError,
    barycentric_subdivide,
    build_structured_cube,
    build_structured_square,
    compute_topology,
    import_simplicial,
    write_msh,
)

TWO_TRI = (np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), np.array([[0, 1, 2], [0, 2, 3]]))


def check_invariants(mesh, volume=1.0):
    fc = mesh.facet_cells
    interior = fc[:, 1] >= 0
    # every facet has one or two neighbours and appears in those cells only
    counts = np.bincount(mesh.cell_facets.ravel(), minlength=mesh.num_facets)
    assert np.array_equal(counts, np.where(interior, 2, 1))
    assert np.all(mesh.volumes > 0)
    assert mesh.volumes.sum() == pytest.approx(volume, rel=1e-12)
    # opposite signs on interior facets
    sign = {}
    for c in range(mesh.num_cells):
        for k in range(mesh.dim + 1):
            sign.setdefault(mesh.cell_facets[c, k], []).append(mesh.cell_facet_signs[c, k])
    for f in np.flatnonzero(interior):
        assert sorted(sign[f]) == [-1, 1]
    for f in np.flatnonzero(~interior):
        assert sign[f] == [1]


@pytest.mark.parametrize("n, nv, nc", [(3, 16, 18), (6, 49, 72)])
def test_square_counts(n, nv, nc):
    m = build_structured_square(n)
    assert (m.num_vertices, m.num_cells) == (nv, nc)
    check_invariants(m)
    xs = np.unique(m.points[:, 0])
    assert np.any(np.isclose(xs, 1 / 3)) and np.any(np.isclose(xs, 2 / 3))


@pytest.mark.parametrize("n, nv, nc", [(3, 64, 162), (6, 343, 1296)])
def test_cube_counts(n, nv, nc):
    m = build_structured_cube(n)
    assert (m.num_vertices, m.num_cells) == (nv, nc)
    check_invariants(m)


@pytest.mark.parametrize("builder, n", [(build_structured_square, 4), (build_structured_cube, 5),
                                        (build_structured_square, 0)])
def test_rejects_bad_n(builder, n):
    with pytest.raises(ValueError):
        builder(n)


def test_refinement_halves_h():
    # exact up to roundoff in the grid coordinates i/n
    for n in (3, 6, 12):
        assert build_structured_square(2 * n).h == pytest.approx(build_structured_square(n).h / 2, rel=1e-14)


def test_barycentric_subdivision():
    m = build_structured_square(3)
    b = barycentric_subdivide(m)
    assert b.num_cells == 54 and b.barycentric
    check_invariants(b)
    # parent vertices survive
    assert np.allclose(b.points[: m.num_vertices], m.points)
    parent = np.repeat(m.volumes, 3)
    assert np.allclose(b.volumes.reshape(-1, 3).sum(axis=1), m.volumes, rtol=1e-14)
    assert parent.size == b.num_cells
    c = build_structured_cube(3)
    assert barycentric_subdivide(c).num_cells == 648


def test_barycentric_reference_triangle():
    m = compute_topology(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
    b = barycentric_subdivide(m)
    assert np.allclose(b.volumes, 1 / 6)


def test_two_triangles_topology():
    m = compute_topology(*TWO_TRI)
    assert m.num_facets == 5
    assert int((m.facet_cells[:, 1] >= 0).sum()) == 1
    f = np.flatnonzero(m.facet_cells[:, 1] >= 0)[0]
    signs = [m.cell_facet_signs[c, list(m.cell_facets[c]).index(f)] for c in (0, 1)]
    assert signs == [1, -1]


def test_single_tet():
    m = compute_topology(np.vstack([np.zeros(3), np.eye(3)]), np.array([[0, 1, 2, 3]]))
    assert m.num_facets == 4 and m.boundary_facets.all()


def test_repeated_vertex_rejected():
    with pytest.raises(ValueError):
        compute_topology(TWO_TRI[0], np.array([[0, 1, 1]]))


def test_negative_orientation_fixed():
    m = compute_topology(TWO_TRI[0], np.array([[0, 2, 1], [0, 3, 2]]))
    assert np.all(m.volumes > 0)


MSH_TRI = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
7 5 5 0
$EndNodes
$Elements
2
1 15 2 0 0 1
2 2 2 0 0 1 2 3
$EndElements
"""


def test_import_single_triangle(tmp_path):
    p = tmp_path / "tri.msh"
    p.write_text(MSH_TRI)
    m = import_simplicial(p)
    # node 7 is unreferenced
    assert m.num_vertices == 3 and m.num_cells == 1
    assert m.boundary_facets.sum() == 3


def test_import_errors(tmp_path):
    p = tmp_path / "quad.msh"
    p.write_text(MSH_TRI.replace("2 2 2 0 0 1 2 3", "2 3 2 0 0 1 2 3 4"))
    with pytest.raises(MeshError, match="non-simplex"):
        import_simplicial(p)
    p.write_text(MSH_TRI.replace("$Nodes", "$Nodez", 1))
    with pytest.raises(MeshError):
        import_simplicial(p)
    p.write_text(MSH_TRI)
    with pytest.raises(MeshError, match="dimension mismatch"):
        import_simplicial(p, dim=3)


@pytest.mark.parametrize("dim", [2, 3])
def test_msh_roundtrip(tmp_path, dim):
    m = build_structured_square(3) if dim == 2 else build_structured_cube(3)
    write_msh(m, tmp_path / "m.msh")
    m2 = import_simplicial(tmp_path / "m.msh", dim=dim)
    assert np.allclose(m2.points, m.points)
    assert m2.num_facets == m.num_facets
    assert m2.volumes.sum() == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.integers(0, 2**31 - 1))
def test_random_affine_image_keeps_invariants(k, seed):
    rng = np.random.default_rng(seed)
    m = build_structured_square(3 * k)
    A = np.eye(2) + 0.3 * rng.standard_normal((2, 2))
    if abs(np.linalg.det(A)) < 0.1:
        return
    mapped = compute_topology(m.points @ A.T, m.cells)
    check_invariants(mapped, volume=abs(np.linalg.det(A)))
