import numpy as np
import pytest

from dmcremesh import shapes
from dmcremesh.errors import EmptyMesh, ParseError
from dmcremesh.io import load_mesh, save_mesh, write_stl
from dmcremesh.mesh import TriangleMesh


def test_obj_cube(tmp_path):
    p = tmp_path / "cube.obj"
    lines = ["# cube"]
    m = shapes.cube()
    lines += [f"v {x} {y} {z}" for x, y, z in m.positions]
    lines += ["f " + " ".join(str(i + 1) for i in t) for t in m.triangles]
    p.write_text("\n".join(lines) + "\n")
    out = load_mesh(p)
    assert out.n_vertices == 8 and out.n_triangles == 12


def test_obj_roundtrip_index_identical(tmp_path):
    m = shapes.l_bracket()
    save_mesh(m, tmp_path / "a.obj")
    back = load_mesh(tmp_path / "a.obj")
    assert np.array_equal(back.triangles, m.triangles)
    assert np.allclose(back.positions, m.positions, rtol=1e-8, atol=1e-9)


@pytest.mark.parametrize("binary", [True, False])
def test_ply_roundtrip(tmp_path, binary):
    m = shapes.icosphere(2, 0.7)
    save_mesh(m, tmp_path / "a.ply", binary=binary)
    back = load_mesh(tmp_path / "a.ply")
    assert np.array_equal(back.triangles, m.triangles)
    assert np.allclose(back.positions, m.positions, atol=1e-7)


def test_stl_duplicates_are_welded(tmp_path):
    m = shapes.cube()
    write_stl(m, tmp_path / "c.stl")
    back = load_mesh(tmp_path / "c.stl")
    assert back.n_vertices == 8 and back.n_triangles == 12


def test_comment_only_obj_is_empty(tmp_path):
    p = tmp_path / "e.obj"
    p.write_text("# comment\n")
    with pytest.raises(EmptyMesh):
        load_mesh(p)


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "bad.obj"
    p.write_text("v 0 0 0\nv 1 0 zero\n")
    with pytest.raises(ParseError) as exc:
        load_mesh(p)
    assert exc.value.line == 2


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_mesh(tmp_path / "nope.obj")


def test_refuse_empty_save(tmp_path):
    with pytest.raises(EmptyMesh):
        save_mesh(TriangleMesh(np.zeros((3, 3)), np.zeros((0, 3), int)), tmp_path / "x.obj")
