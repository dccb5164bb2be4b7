import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmcremesh import shapes
from dmcremesh.errors import InconsistentRecords, NoSignChange
from dmcremesh.extract import (ExtractConfig, assemble, bisect_crossing, check_shared_corners, extract,
                               morton3, morton_codes, place_vertex, qef_solve)
from dmcremesh.field import LinfField
from dmcremesh.mesh import (check_watertight_manifold, connected_components, crease_fraction,
                            normalize_to_unit_cube)
from dmcremesh.pipeline import RemeshConfig, remesh
from dmcremesh.tables import N_COMPONENTS
from dmcremesh.voxelize import SparseCornerGrid, classify_corners, grid_spacing


def _synthetic(R, occupied, **kw):
    grid = SparseCornerGrid.from_occupancy(R, occupied)
    return extract(grid, None, ExtractConfig(**kw))


def test_single_corner_gives_octahedron():
    d = _synthetic(32, [(16, 16, 16)])
    assert d.n_records == 8
    assert len(d.offsets) == 8
    m = d.assembled
    assert m.n_triangles == 12
    rep = check_watertight_manifold(m)
    assert rep.watertight and rep.euler_characteristic == 2


def test_separate_corners_give_separate_shells():
    d = _synthetic(32, [(8, 8, 8), (20, 20, 20)])
    assert connected_components(d.assembled) == 2
    assert check_watertight_manifold(d.assembled).euler_characteristic == 4


def test_repair_removes_ambiguous_face():
    d = _synthetic(32, [(16, 16, 16), (17, 17, 16)])
    assert d.stats["repair_flips"] >= 1
    rep = check_watertight_manifold(d.assembled)
    assert rep.watertight
    assert connected_components(d.assembled) == 1


@given(st.lists(st.tuples(*(st.integers(1, 7),) * 3), min_size=1, max_size=60))
def test_random_occupancy_is_watertight(cells):
    # a 7^3 block inside a 32 grid keeps the example small
    d = _synthetic(32, [(i + 10, j + 10, k + 10) for i, j, k in cells])
    rep = check_watertight_manifold(d.assembled)
    assert rep.watertight
    assert np.all(np.diff(d.vertex_ptr) == N_COMPONENTS[d.occupancy])
    assert np.all(np.diff(morton_codes(d.coords)) > 0)
    assert np.all((d.offsets >= 0) & (d.offsets < 1))


def test_morton_interleaving():
    assert (morton3(1, 0, 0), morton3(0, 1, 0), morton3(0, 0, 1)) == (1, 2, 4)
    assert morton3(3, 0, 0) == 0b1001
    assert morton3(1023, 1023, 1023) == 2**30 - 1
    ijk = np.array([[1, 0, 0], [0, 0, 1], [2, 3, 1]])
    assert morton_codes(ijk).tolist() == [morton3(*c) for c in ijk.tolist()]


def test_tri_bits_roundtrip_and_shorter_diagonal():
    mesh, _ = normalize_to_unit_cube(shapes.icosphere(2), 0.1)
    d = remesh(mesh, RemeshConfig(resolution=32)).dmc
    assert d.tri_bits.max() < 8
    again, _ = assemble(d.coords, d.occupancy, d.vertex_ptr, d.offsets, d.tri_bits, 32)
    np.testing.assert_array_equal(again.triangles, d.assembled.triangles)
    # each quad is split along its shorter diagonal: the shared edge of every triangle
    # pair is never longer than the other diagonal of the quad
    t = d.assembled.triangles.reshape(-1, 2, 3)
    p = d.assembled.positions
    for a, b in t[:200]:
        shared = sorted(set(a) & set(b))
        other = sorted(set(a) ^ set(b))
        assert len(shared) == 2 and len(other) == 2
        ds = np.linalg.norm(p[shared[0]] - p[shared[1]])
        do = np.linalg.norm(p[other[0]] - p[other[1]])
        assert ds <= do + 1e-12


def test_complement_flips_orientation():
    d = _synthetic(32, [(12, 12, 12), (12, 13, 12), (13, 12, 13)])
    inv, _ = assemble(d.coords, 255 - d.occupancy, d.vertex_ptr, d.offsets, d.tri_bits, 32)
    a = {tuple(t) for t in d.assembled.triangles.tolist()}
    b = {tuple(t[::-1]) for t in inv.triangles.tolist()}
    norm = lambda s: {tuple(np.roll(t, -int(np.argmin(t)))) for t in s}
    assert norm(a) == norm(b)


def test_missing_neighbour_record_is_rejected():
    d = _synthetic(32, [(16, 16, 16)])
    keep = np.arange(1, d.n_records)
    with pytest.raises(InconsistentRecords):
        assemble(d.coords[keep], d.occupancy[keep], np.concatenate([[0], np.cumsum(np.ones(7, int))]),
                 d.offsets[keep], d.tri_bits[keep], 32)


def test_shared_corner_disagreement():
    coords = np.array([[0, 0, 0], [1, 0, 0]])
    check_shared_corners(coords, np.array([0b10, 0b1]))
    with pytest.raises(InconsistentRecords):
        check_shared_corners(coords, np.array([0b10, 0b10]))


# ------------------------------------------------------------ crossings and placement

@pytest.fixture(scope="module")
def flat_field():
    h = grid_spacing(64)
    return LinfField(shapes.patch(1.0), 0.6 * h, "linf"), h


@pytest.mark.parametrize("k", [4, 8, 12])
def test_bisection_error_halves_per_iteration(flat_field, k):
    field, h = flat_field
    a = np.array([0.05, 0.07, 0.0])
    b = a + [0, 0, h]
    x = bisect_crossing(a, b, field, iters=k)
    err = abs(x[2] - field.epsilon)
    assert err <= h * 2.0**-k
    # the bracket is kept strictly inside the edge
    assert h * 2.0**-k <= x[2] <= h * (1 - 2.0**-k)


def test_bisection_without_sign_change(flat_field):
    field, h = flat_field
    with pytest.raises(NoSignChange):
        bisect_crossing([0.0, 0.0, 0.0], [0.0, 0.0, 0.1 * h], field)


def test_bisection_direction_symmetric(flat_field):
    field, h = flat_field
    a = np.array([0.1, 0.2, 0.0])
    b = a + [0, 0, h]
    np.testing.assert_allclose(bisect_crossing(a, b, field, 20), bisect_crossing(b, a, field, 20), atol=h * 2e-6)


def test_qef_recovers_corner():
    n = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])
    p = np.array([[0.3, 0.1, 0.0], [0.0, 0.3, 0.2], [0.1, 0.0, 0.3]])
    np.testing.assert_allclose(qef_solve(p, n, 3), [0.3, 0.3, 0.3], atol=1e-14)


def test_qef_rank_deficient_stays_at_mass_point_along_plane():
    n = np.array([[0, 0, 1.0]] * 3)
    p = np.array([[0.0, 0.0, 0.1], [1.0, 0.0, 0.1], [0.0, 1.0, 0.1]])
    np.testing.assert_allclose(qef_solve(p, n, 3), [1 / 3, 1 / 3, 0.1], atol=1e-14)


def test_qef_two_planes_give_crease_point():
    n = np.array([[1.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0], [0, 1.0, 0]])
    p = np.array([[0.5, 0.0, 0.0], [0.5, 0.4, 0.2], [0.0, 0.5, 0.0], [0.2, 0.5, 0.4]])
    x = qef_solve(p, n, 4)
    np.testing.assert_allclose(x[:2], [0.5, 0.5], atol=1e-14)
    assert x[2] == pytest.approx(p[:, 2].mean())


def test_place_vertex_is_clipped_into_cell():
    R = 64
    h = 2.0 / R
    cell = (40, 40, 40)
    lo = np.array(cell) * h - 1
    pts = lo + h * np.array([[0.2, 0.5, 0.5], [0.5, 0.2, 0.5]])
    off = place_vertex(cell, 0, pts, resolution=R)
    np.testing.assert_allclose(off, [0.35, 0.35, 0.5], atol=1e-12)
    far = place_vertex(cell, 0, lo + h * np.array([[3.0, -1.0, 0.5]]), resolution=R)
    assert np.all((far >= 0) & (far < 1))


# ------------------------------------------------------------ full extraction

@pytest.mark.parametrize("name", ["cube", "tetrahedron", "torus", "l_bracket", "two_shells", "open_box",
                                  "random_soup", "fin"])
def test_fixtures_are_watertight_at_32(corpus, name):
    mesh = corpus[name]
    d = remesh(mesh, RemeshConfig(resolution=32)).dmc
    rep = check_watertight_manifold(d.assembled)
    assert rep.watertight, name
    assert d.stats["records"] == d.n_records


def test_cube_creases_linf_vs_l2():
    mesh = shapes.cube()
    frac = {}
    for mode in ("linf", "l2"):
        d = remesh(mesh, RemeshConfig(resolution=64, mode=mode)).dmc
        frac[mode] = crease_fraction(d.assembled)
    assert frac["linf"] >= 0.95
    assert frac["l2"] < 0.5


def test_refine_keeps_topology():
    mesh = shapes.cube()
    a = remesh(mesh, RemeshConfig(resolution=32)).dmc
    b = remesh(mesh, RemeshConfig(resolution=32, refine=True)).dmc
    # only positions move (and with them some diagonal choices); the records stay
    np.testing.assert_array_equal(a.coords, b.coords)
    np.testing.assert_array_equal(a.occupancy, b.occupancy)
    assert a.assembled.n_triangles == b.assembled.n_triangles
    assert check_watertight_manifold(b.assembled).watertight


def test_centroid_placement_is_smoother_on_creases():
    mesh = shapes.cube()
    q = remesh(mesh, RemeshConfig(resolution=64, placement="qef")).dmc
    c = remesh(mesh, RemeshConfig(resolution=64, placement="centroid")).dmc
    assert crease_fraction(q.assembled) > crease_fraction(c.assembled)


def test_midpoints_without_field():
    mesh, _ = normalize_to_unit_cube(shapes.icosphere(2), 0.1)
    grid = classify_corners(mesh, LinfField(mesh, 1.5 * grid_spacing(32)), 32)
    d = extract(grid)
    assert check_watertight_manifold(d.assembled).watertight


def _plain_bisection(a, b, field, iters):
    """Textbook bisection from the occupied end; the reference for the guided bracket."""
    occupied = lambda x: field.epsilon - field.distance(x)[0] >= 0
    if not occupied(a):
        a, b = b, a
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if occupied(a + mid * (b - a)):
            lo = mid
        else:
            hi = mid
    t = min(max(0.5 * (lo + hi), 2.0**-iters), 1 - 2.0**-iters)
    return a + t * (b - a)


@pytest.mark.parametrize("name", ["cube", "torus", "star_prism"])
def test_guided_bracket_equals_plain_bisection(corpus, name):
    from dmcremesh.extract import edge_keys_decode, find_crossing_edges

    mesh, _ = normalize_to_unit_cube(corpus[name], 0.1)
    h = grid_spacing(64)
    field = LinfField(mesh, 1.5 * h)
    grid = classify_corners(mesh, field, 64)
    keys = find_crossing_edges(grid)
    axis, lower = edge_keys_decode(keys, 64)
    pick = np.random.default_rng(1).choice(len(keys), 150, replace=False)
    for n in pick:
        a = lower[n] * h - 1.0
        b = a.copy()
        b[axis[n]] += h
        np.testing.assert_array_equal(bisect_crossing(a, b, field, 12), _plain_bisection(a, b, field, 12))
