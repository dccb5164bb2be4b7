import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmcremesh import shapes
from dmcremesh.extract import bisect_crossing
from dmcremesh.field import LinfField, Mode, evaluate, l2_distance, linf_distance, occupancy_margin
from dmcremesh.mesh import TriangleMesh

from oracles import linf_scan_many

TRI = TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


def corner_fixture():
    """Three unit squares meeting at the origin in the planes x=0, y=0, z=0 (outward -x, -y, -z)."""
    return shapes.box((0, 0, 0), (1, 1, 1))


def test_single_plane():
    f = LinfField(TRI, 0.1)
    assert linf_distance(f, (0.25, 0.25, 1)) == pytest.approx(1.0)
    assert l2_distance(f, (0.25, 0.25, 1)) == pytest.approx(1.0)


@pytest.mark.parametrize("t", [0.01, 0.1, 0.3])
def test_corner_case(t):
    f = LinfField(corner_fixture(), 0.1)
    assert linf_distance(f, (-t, -t, -t)) == pytest.approx(t, rel=1e-12)
    assert l2_distance(f, (-t, -t, -t)) == pytest.approx(t * np.sqrt(3), rel=1e-12)


def test_corner_level_set_on_diagonal():
    eps = 0.05
    f = LinfField(corner_fixture(), eps)
    a = np.zeros(3) - 1e-9
    b = np.full(3, -0.2)
    x = bisect_crossing(a, b, f, iters=40)
    assert np.allclose(x, -eps, atol=1e-9)
    x2 = bisect_crossing(a, b, f.with_mode("l2"), iters=40)
    assert np.allclose(x2, -eps / np.sqrt(3), atol=1e-9)


def test_point_on_surface():
    f = LinfField(shapes.cube(), 0.02)
    assert l2_distance(f, (1.0, 0.1, 0.2)) == pytest.approx(0.0, abs=1e-15)
    assert occupancy_margin(f, (1.0, 0.1, 0.2)) == pytest.approx(0.02)


def test_margin_of_flat_patch():
    eps = 0.01
    f = LinfField(shapes.patch(1.0, 2), eps)
    assert occupancy_margin(f, (0.1, 0.1, 2 * eps)) == pytest.approx(-eps)


def test_planes_contain_vertices():
    m = shapes.random_soup(300)
    f = LinfField(m, 0.1)
    tv = m.corners()
    s = np.einsum("tj,tkj->tk", f.plane_normals, tv) - f.plane_offsets[:, None]
    assert np.abs(s[f.plane_ok]).max() < 1e-9
    assert np.allclose(np.linalg.norm(f.plane_normals[f.plane_ok], axis=1), 1, atol=1e-12)


def test_invalid_epsilon_and_mode():
    with pytest.raises(ValueError):
        LinfField(TRI, 0.0)
    with pytest.raises(ValueError):
        Mode.parse("l3")


@pytest.mark.parametrize("name", ["cube", "l_bracket", "random_soup", "fin", "two_spheres", "stairs"])
def test_matches_scan_oracle(corpus, name):
    m = corpus[name]
    f = LinfField(m, 0.05)
    rng = np.random.default_rng(11)
    lo, hi = m.bounds()
    pts = rng.uniform(lo - 0.3, hi + 0.3, (200, 3))
    d_inf = evaluate(f, pts, Mode.LINF)[0]
    d_l2 = evaluate(f, pts, Mode.L2)[0]
    oinf, ol2, _ = linf_scan_many(pts, m.positions, m.triangles)
    np.testing.assert_allclose(d_inf, oinf, atol=1e-9, rtol=0)
    np.testing.assert_allclose(d_l2, ol2, atol=1e-12, rtol=0)


def test_face_region_modes_agree():
    m = shapes.icosphere(2)
    f = LinfField(m, 0.05)
    rng = np.random.default_rng(4)
    from dmcremesh.bvh import nearest_points
    pts = rng.normal(size=(2000, 3))
    feat = nearest_points(f.bvh, pts)[3]
    face = pts[feat == 0]
    assert len(face) > 50
    assert np.allclose(evaluate(f, face, "linf")[0], evaluate(f, face, "l2")[0], atol=1e-12)


def test_linf_bounded_by_l2():
    m = shapes.random_soup(200)
    f = LinfField(m, 0.05)
    pts = np.random.default_rng(8).uniform(-1, 1, (3000, 3))
    assert np.all(evaluate(f, pts, "linf")[0] <= evaluate(f, pts, "l2")[0] + 1e-12)


def test_gradient_is_unit():
    f = LinfField(shapes.torus(), 0.05)
    pts = np.random.default_rng(9).uniform(-1, 1, (1000, 3))
    for mode in ("linf", "l2"):
        g = f.gradient(pts, mode)
        assert np.allclose(np.linalg.norm(g, axis=1), 1)


@given(st.lists(st.floats(-1.5, 1.5), min_size=6, max_size=6))
def test_l2_margin_lipschitz(xs):
    f = _field()
    p = np.array(xs).reshape(2, 3)
    g = f.epsilon - f.distance(p, "l2")
    assert abs(g[0] - g[1]) <= np.linalg.norm(p[0] - p[1]) + 1e-12


_F = {}


def _field():
    if "f" not in _F:
        _F["f"] = LinfField(shapes.l_bracket(), 0.05)
    return _F["f"]


def test_degenerate_only_falls_back_to_euclidean():
    m = TriangleMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
    f = LinfField(m, 0.1)
    assert linf_distance(f, (0.5, 1.0, 0.0)) == pytest.approx(1.0)
