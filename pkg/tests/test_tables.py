import numpy as np
import pytest

from dmcremesh.tables import (EDGE_COMPONENT, EDGE_CORNERS, FACE_CORNERS, FACE_EDGES, N_COMPONENTS,
                              ambiguous_faces, components, crossing_edges, vertex_count)
from oracles import cell_components


def test_edge_corners_are_unit_axis_steps():
    for e, (lo, hi) in enumerate(EDGE_CORNERS):
        assert hi - lo == 1 << (e // 4)
    assert len({tuple(p) for p in EDGE_CORNERS.tolist()}) == 12


def test_faces_have_four_corners_and_edges():
    assert FACE_CORNERS.shape == (6, 4) and FACE_EDGES.shape == (6, 4)
    for f in range(6):
        for e in FACE_EDGES[f]:
            assert set(EDGE_CORNERS[e]) <= set(FACE_CORNERS[f])


@pytest.mark.parametrize("byte", range(256))
def test_component_count_matches_region_oracle(byte):
    assert N_COMPONENTS[byte] == cell_components(byte) == vertex_count(byte)


def test_components_partition_crossing_edges():
    for b in range(256):
        comps = components(b)
        flat = sorted(e for c in comps for e in c)
        assert flat == crossing_edges(b)
        for ci, c in enumerate(comps):
            assert all(EDGE_COMPONENT[b, e] == ci for e in c)
        assert all(EDGE_COMPONENT[b, e] == -1 for e in set(range(12)) - set(flat))


def test_complement_has_same_groups():
    for b in range(256):
        assert components(b) == components(255 - b)


def test_uniform_cells_are_empty_and_counts_bounded():
    assert N_COMPONENTS[0] == N_COMPONENTS[255] == 0
    assert N_COMPONENTS.max() == 3  # the fixed face rule never isolates four patches
    assert all(N_COMPONENTS[1 << c] == 1 for c in range(8))


def test_every_component_closes_a_loop():
    # each group of crossing edges is a closed polygon: at least three edges
    for b in range(1, 255):
        assert all(len(c) >= 3 for c in components(b))


def test_ambiguous_faces_checkerboard():
    assert ambiguous_faces(0b1001) == [4]  # corners 0 and 3 on the z=0 face
    assert ambiguous_faces(0b0001) == []
    assert len(ambiguous_faces(0b01101001)) == 6
