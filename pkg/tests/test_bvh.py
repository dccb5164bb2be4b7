import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmcremesh import shapes
from dmcremesh.bvh import Feature, build_bvh, closest_point_triangle, incident_triangles, nearest_point, nearest_points
from dmcremesh.errors import EmptyMesh
from dmcremesh.mesh import TriangleMesh

from oracles import WeldedAdjacency, barycentric, closest_on_triangle, scan_distances

TRI = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


def test_face_projection():
    hit = nearest_point(build_bvh(TRI), (0.25, 0.25, 1))
    assert np.allclose(hit.point, (0.25, 0.25, 0)) and hit.distance == pytest.approx(1.0)
    assert hit.feature == Feature.FACE


def test_vertex_clamp():
    hit = nearest_point(build_bvh(TRI), (2, 0, 0))
    assert np.allclose(hit.point, (1, 0, 0)) and hit.feature == Feature.VERTEX
    assert hit.distance == pytest.approx(1.0)


def test_single_triangle_tree():
    b = build_bvh(TRI)
    assert b.depth() == 1 and len(b.leaves()) == 1


def test_cube_tree_structure():
    b = build_bvh(shapes.cube())
    assert b.depth() <= 6
    assert sorted(np.concatenate(b.leaves()).tolist()) == list(range(12))


def test_build_deterministic():
    m = shapes.random_soup(200)
    a, b = build_bvh(m), build_bvh(m)
    assert all(np.array_equal(x, y) for x, y in zip(a.arrays, b.arrays))
    assert all(np.array_equal(x, y) for x, y in zip(a.leaves(), b.leaves()))


def test_node_boxes_contain_children():
    b = build_bvh(shapes.torus())
    for n in range(len(b.node_left)):
        if b.node_left[n] < 0:
            ids = b.order[b.node_start[n]:b.node_start[n] + b.node_count[n]]
            v = b.tri_v[ids].reshape(-1, 3)
            assert np.all(v.min(0) >= b.node_lo[n]) and np.all(v.max(0) <= b.node_hi[n])
        else:
            for c in (b.node_left[n], b.node_right[n]):
                assert np.all(b.node_lo[c] >= b.node_lo[n]) and np.all(b.node_hi[c] <= b.node_hi[n])


def test_empty_mesh():
    with pytest.raises(EmptyMesh):
        build_bvh(TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), int)))


@pytest.mark.parametrize("name", ["random_soup", "torus", "l_bracket", "fin", "soup_small"])
def test_matches_linear_scan(corpus, name):
    m = corpus[name]
    rng = np.random.default_rng(5)
    lo, hi = m.bounds()
    pts = rng.uniform(lo - 0.2, hi + 0.2, (300, 3))
    t, bary, d, _, _ = nearest_points(build_bvh(m), pts)
    tris = m.corners()
    ot, od2 = scan_distances(pts, tris)
    od = np.sqrt(od2)
    np.testing.assert_allclose(d, od, atol=1e-12, rtol=0)
    assert np.all((t <= ot) | (np.abs(d - od) < 1e-12))
    for n, p in enumerate(pts):
        oq, _ = closest_on_triangle(p, tris[t[n]])
        assert np.allclose(bary[n] @ tris[t[n]], oq, atol=1e-9)


def test_ties_go_to_lowest_id():
    # two copies of the same triangle: always the first one
    m = TriangleMesh(np.tile(TRI.positions, (2, 1)), [[0, 1, 2], [3, 4, 5]])
    rng = np.random.default_rng(0)
    t = nearest_points(build_bvh(m), rng.normal(size=(100, 3)))[0]
    assert np.all(t == 0)


def test_barycentric_invariants():
    m = shapes.icosphere(2)
    rng = np.random.default_rng(2)
    _, bary, _, _, _ = nearest_points(build_bvh(m), rng.normal(size=(500, 3)))
    assert np.all(bary >= -1e-12) and np.allclose(bary.sum(1), 1, atol=1e-12)


def test_incident_sets_cube():
    m = shapes.cube()
    b = build_bvh(m)
    hit = nearest_point(b, (0.1, 0.2, 2.0))
    assert incident_triangles(b, hit) == {hit.triangle_id}
    hit = nearest_point(b, (0.0, 0.8, 0.8))  # beyond the edge y = z = 0.5
    assert hit.feature == Feature.EDGE and len(incident_triangles(b, hit)) == 2
    corner = m.positions.min(axis=0)
    hit = nearest_point(b, corner - 0.3)
    inc = incident_triangles(b, hit)
    assert hit.feature == Feature.VERTEX and 3 <= len(inc) <= 6
    adj = WeldedAdjacency(m.positions, m.triangles)
    assert inc == adj.incident(hit.triangle_id, barycentric(hit.point, m.corners()[hit.triangle_id]))


def test_incidence_welds_soup():
    m = shapes.cube()
    soup = TriangleMesh(m.corners().reshape(-1, 3), np.arange(36).reshape(12, 3))
    b = build_bvh(soup)
    hit = nearest_point(b, soup.positions.min(axis=0) - 0.3)
    assert len(incident_triangles(b, hit)) >= 3


def test_non_manifold_edge_includes_all():
    b = build_bvh(shapes.fin_fixture())
    sizes = set()
    rng = np.random.default_rng(3)
    for p in rng.uniform(-1, 1, (400, 3)):
        hit = nearest_point(b, p)
        inc = incident_triangles(b, hit)
        assert hit.triangle_id in inc
        sizes.add(len(inc))
    assert max(sizes) >= 3


def test_degenerate_triangle_uses_sides():
    u, v, w, d2 = closest_point_triangle(0.5, 1.0, 0.0, np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]]), False)
    assert d2 == pytest.approx(1.0) and min(u, v, w) >= 0


@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_distance_is_lipschitz(xs):
    b = _lip_bvh()
    p = np.array(xs).reshape(2, 3)
    d = nearest_points(b, p)[2]
    assert abs(d[0] - d[1]) <= np.linalg.norm(p[0] - p[1]) + 1e-12


_BVH = {}


def _lip_bvh():
    if "b" not in _BVH:
        _BVH["b"] = build_bvh(shapes.l_bracket())
    return _BVH["b"]
