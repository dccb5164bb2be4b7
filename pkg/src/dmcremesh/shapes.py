"""Procedural fixture meshes used by the tests, the acceptance suite and the CLI demos."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh, weld


def merge(*meshes: TriangleMesh) -> TriangleMesh:
    """Concatenate meshes without welding (a soup)."""
    pos, tri, base = [], [], 0
    for m in meshes:
        pos.append(m.positions)
        tri.append(m.triangles + base)
        base += m.n_vertices
    return TriangleMesh(np.concatenate(pos), np.concatenate(tri))


def transformed(mesh: TriangleMesh, matrix=None, offset=(0, 0, 0), flip: bool = False) -> TriangleMesh:
    pos = mesh.positions if matrix is None else mesh.positions @ np.asarray(matrix, dtype=np.float64).T
    tri = mesh.triangles[:, ::-1] if flip else mesh.triangles
    return TriangleMesh(pos + np.asarray(offset, dtype=np.float64), tri)


def rotation(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    k = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])
    return np.eye(3) + s * k + (1 - c) * (k @ k)


def box(lo=(-0.5, -0.5, -0.5), hi=(0.5, 0.5, 0.5)) -> TriangleMesh:
    """Axis-aligned box, 8 vertices, 12 outward-facing triangles (diagonals through vertex 0 / 7)."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    v = np.array([[(hi if (c >> a) & 1 else lo)[a] for a in range(3)] for c in range(8)])
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, np.array(tris))


def cube(size: float = 1.0) -> TriangleMesh:
    return box((0, 0, 0), (size, size, size))


def tetrahedron() -> TriangleMesh:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    return TriangleMesh(v, np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]))


def octahedron() -> TriangleMesh:
    v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64)
    t = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    return TriangleMesh(v, np.array(t))


def icosphere(level: int = 3, radius: float = 1.0, center=(0, 0, 0)) -> TriangleMesh:
    phi = (1 + 5**0.5) / 2
    v = np.array([[-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
                  [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
                  [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1]], dtype=np.float64)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(level):
        edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        uniq, inv = np.unique(edges, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        mid = v[uniq[:, 0]] + v[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        m = inv.reshape(3, -1).T + len(v)
        v = np.concatenate([v, mid])
        a, b, c = f[:, 0], f[:, 1], f[:, 2]
        ab, bc, ca = m[:, 0], m[:, 1], m[:, 2]
        f = np.concatenate([np.stack([a, ab, ca], 1), np.stack([b, bc, ab], 1),
                            np.stack([c, ca, bc], 1), np.stack([ab, bc, ca], 1)])
    return TriangleMesh(v * radius + np.asarray(center, dtype=np.float64), f)


def _grid_surface(fn, nu: int, nv: int, wrap_u: bool, wrap_v: bool) -> TriangleMesh:
    """Triangulated parametric surface; ``fn(u, v)`` with u, v in [0, 1]."""
    cu = nu if wrap_u else nu + 1
    cv = nv if wrap_v else nv + 1
    uu, vv = np.meshgrid(np.arange(cu) / nu, np.arange(cv) / nv, indexing="ij")
    pos = fn(uu.reshape(-1), vv.reshape(-1))
    idx = lambda i, j: (i % cu) * cv + (j % cv)
    tris = []
    for i in range(nu):
        for j in range(nv):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(pos, np.array(tris))


def torus(major: float = 0.5, minor: float = 0.2, nu: int = 64, nv: int = 32) -> TriangleMesh:
    def fn(u, v):
        a, b = 2 * np.pi * u, 2 * np.pi * v
        r = major + minor * np.cos(b)
        return np.stack([r * np.cos(a), r * np.sin(a), minor * np.sin(b)], 1)
    return _grid_surface(fn, nu, nv, True, True)


def patch(size: float = 1.0, n: int = 1, z: float = 0.0) -> TriangleMesh:
    """Open square patch in the plane z, centered on the z axis."""
    def fn(u, v):
        return np.stack([(u - 0.5) * size, (v - 0.5) * size, np.full_like(u, z)], 1)
    return _grid_surface(fn, n, n, False, False)


def extrude(polygon, height: float = 1.0) -> TriangleMesh:
    """Prism over a simple CCW polygon (fan-triangulated caps, so it must be star-shaped from vertex 0)."""
    p = np.asarray(polygon, dtype=np.float64)
    n = len(p)
    bottom = np.column_stack([p, np.zeros(n)])
    top = np.column_stack([p, np.full(n, height)])
    pos = np.concatenate([bottom, top])
    tris = []
    for i in range(1, n - 1):
        tris.append((0, i + 1, i))
        tris.append((n, n + i, n + i + 1))
    for i in range(n):
        j = (i + 1) % n
        tris += [(i, j, n + j), (i, n + j, n + i)]
    return TriangleMesh(pos, np.array(tris))


def l_bracket(length: float = 1.0, thickness: float = 0.35, depth: float = 0.6) -> TriangleMesh:
    poly = [(0, 0), (length, 0), (length, thickness), (thickness, thickness),
            (thickness, length), (0, length)]
    # the L is not star-shaped from (0, 0)'s fan order for every choice; triangulate explicitly
    p = np.asarray(poly, dtype=np.float64)
    caps = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5)]
    n = len(p)
    pos = np.concatenate([np.column_stack([p, np.zeros(n)]), np.column_stack([p, np.full(n, depth)])])
    tris = [(a, c, b) for a, b, c in caps] + [(a + n, b + n, c + n) for a, b, c in caps]
    for i in range(n):
        j = (i + 1) % n
        tris += [(i, j, n + j), (i, n + j, n + i)]
    return TriangleMesh(pos, np.array(tris))


def cylinder(radius: float = 0.5, height: float = 1.0, n: int = 48) -> TriangleMesh:
    a = 2 * np.pi * np.arange(n) / n
    return extrude(np.column_stack([radius * np.cos(a), radius * np.sin(a)]), height)


def cone(radius: float = 0.5, height: float = 1.0, n: int = 48) -> TriangleMesh:
    a = 2 * np.pi * np.arange(n) / n
    ring = np.column_stack([radius * np.cos(a), radius * np.sin(a), np.zeros(n)])
    pos = np.concatenate([ring, [[0, 0, height], [0, 0, 0]]])
    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris += [(i, j, n), (j, i, n + 1)]
    return TriangleMesh(pos, np.array(tris))


def pyramid() -> TriangleMesh:
    pos = np.array([[-0.5, -0.5, 0], [0.5, -0.5, 0], [0.5, 0.5, 0], [-0.5, 0.5, 0], [0, 0, 0.7]])
    tris = [(0, 2, 1), (0, 3, 2), (0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    return TriangleMesh(pos, np.array(tris))


def star_prism(points: int = 5, r_out: float = 0.5, r_in: float = 0.22, height: float = 0.3) -> TriangleMesh:
    a = np.pi / 2 + np.pi * np.arange(2 * points) / points
    r = np.where(np.arange(2 * points) % 2 == 0, r_out, r_in)
    poly = np.column_stack([r * np.cos(a), r * np.sin(a)])
    # star-shaped from its center: add the center as vertex 0 for the fan
    n = len(poly)
    pos = np.concatenate([[[0, 0, 0]], np.column_stack([poly, np.zeros(n)]),
                          [[0, 0, height]], np.column_stack([poly, np.full(n, height)])])
    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris.append((0, 2 + j - 1, 1 + i))
        tris.append((n + 1, n + 2 + i, n + 2 + j))
        tris += [(1 + i, 1 + j, n + 2 + j), (1 + i, n + 2 + j, n + 2 + i)]
    return TriangleMesh(pos, np.array(tris))


def rounded_box(half: float = 0.5, radius: float = 0.1, level: int = 3) -> TriangleMesh:
    """Box with every edge and corner filleted: the convex hull of 8 corner spheres."""
    c = half - radius
    ball = icosphere(level, radius).positions
    pts = np.concatenate([ball + np.array([sx, sy, sz]) * c
                          for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    return _hull(pts)


def _hull(pts) -> TriangleMesh:
    """Outward-oriented convex hull, unused points dropped."""
    from scipy.spatial import ConvexHull

    pts = np.asarray(pts, dtype=np.float64)
    tris = ConvexHull(pts).simplices.copy()
    n = np.cross(pts[tris[:, 1]] - pts[tris[:, 0]], pts[tris[:, 2]] - pts[tris[:, 0]])
    inner = pts.mean(axis=0)
    flip = np.einsum("ij,ij->i", n, pts[tris].mean(axis=1) - inner) < 0
    tris[flip] = tris[flip][:, ::-1]
    used = np.unique(tris)
    remap = np.full(len(pts), -1)
    remap[used] = np.arange(len(used))
    return TriangleMesh(pts[used], remap[tris])


def chamfered_cube(half: float = 0.5, chamfer: float = 0.15, edges: int = 1) -> TriangleMesh:
    """Cube with its first ``edges`` vertical edges cut by a 45 degree chamfer (convex hull)."""
    pts = []
    corners_xy = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
    for k, (sx, sy) in enumerate(corners_xy):
        for sz in (-1, 1):
            if k < edges:
                pts.append((sx * half, sy * (half - chamfer), sz * half))
                pts.append((sx * (half - chamfer), sy * half, sz * half))
            else:
                pts.append((sx * half, sy * half, sz * half))
    return _hull(pts)


def two_shells(r_out: float = 0.8, r_in: float = 0.4, level: int = 3) -> TriangleMesh:
    """Concentric spheres; the inner one faces inward so the pair bounds a hollow ball."""
    inner = icosphere(level, r_in)
    return merge(icosphere(level, r_out), transformed(inner, flip=True))


def random_soup(n: int = 500, seed: int = 0, size: float = 0.25) -> TriangleMesh:
    """``n`` independent random triangles in the unit cube (no shared vertices)."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-1, 1, (n, 1, 3))
    pos = (centers + rng.normal(0, size, (n, 3, 3))).reshape(-1, 3)
    return TriangleMesh(pos, np.arange(3 * n).reshape(-1, 3))


def fin_fixture() -> TriangleMesh:
    """Cube with an extra fin glued to one edge: that edge has three incident faces."""
    c = box((0, 0, 0), (1, 1, 1))
    fin_pos = np.array([[1, 1, 0], [1, 1, 1], [1.6, 1.6, 0.0], [1.6, 1.6, 1.0]], dtype=np.float64)
    fin = TriangleMesh(fin_pos, np.array([[0, 2, 3], [0, 3, 1]]))
    m = merge(c, fin)
    pos, tri, _ = weld(m.positions, m.triangles, 1e-9)
    return TriangleMesh(pos, tri)


def thin_plate(thickness: float = 0.02) -> TriangleMesh:
    return box((-0.5, -0.5, -thickness / 2), (0.5, 0.5, thickness / 2))


def intersecting_boxes() -> TriangleMesh:
    """Two overlapping boxes as a self-intersecting soup."""
    return merge(box((-0.5, -0.3, -0.3), (0.3, 0.3, 0.3)), box((-0.2, -0.5, -0.2), (0.5, 0.1, 0.5)))


def flipped_normals_cube() -> TriangleMesh:
    """Cube whose faces have random orientation: the field must not care."""
    c = cube()
    rng = np.random.default_rng(3)
    tri = c.triangles.copy()
    flip = rng.random(len(tri)) < 0.5
    tri[flip] = tri[flip][:, ::-1]
    return TriangleMesh(c.positions, tri)


def cube_with_internal_wall() -> TriangleMesh:
    return merge(cube(), transformed(patch(1.0, 2, 0.0), offset=(0.5, 0.5, 0.5)))


def open_box() -> TriangleMesh:
    """Box missing its top face."""
    c = box()
    keep = ~np.all(c.positions[c.triangles][:, :, 2] > 0.4, axis=1)
    return TriangleMesh(c.positions, c.triangles[keep])


def nested_cubes() -> TriangleMesh:
    return merge(box((-0.5,) * 3, (0.5,) * 3), box((-0.2,) * 3, (0.2,) * 3))


def stairs(steps: int = 3) -> TriangleMesh:
    poly = [(0, 0), (steps, 0)]
    for s in range(steps, 0, -1):
        poly += [(s, steps - s + 1), (s - 1, steps - s + 1)]
    poly = np.array(poly[:-1] + [(0, steps)], dtype=np.float64)
    # fan from (0, 0) is valid for this monotone staircase
    return extrude(poly / steps, 0.5)


def hexagonal_prism() -> TriangleMesh:
    a = 2 * np.pi * np.arange(6) / 6
    return extrude(np.column_stack([0.5 * np.cos(a), 0.5 * np.sin(a)]), 0.8)


def tilted_cube(angle: float = 0.5) -> TriangleMesh:
    return transformed(box(), rotation((1, 2, 3), angle))


def corpus() -> dict[str, TriangleMesh]:
    """The fixture corpus: closed, open, soup, nested and non-manifold inputs."""
    return {
        "cube": cube(),
        "sphere": icosphere(3, 0.5),
        "torus": torus(),
        "l_bracket": l_bracket(),
        "open_patch": patch(1.0, 4),
        "two_shells": two_shells(),
        "random_soup": random_soup(500),
        "fin": fin_fixture(),
        "tetrahedron": tetrahedron(),
        "octahedron": octahedron(),
        "cylinder": cylinder(),
        "cone": cone(),
        "pyramid": pyramid(),
        "star_prism": star_prism(),
        "rounded_box": rounded_box(),
        "chamfered_cube": chamfered_cube(),
        "thin_plate": thin_plate(),
        "intersecting_boxes": intersecting_boxes(),
        "flipped_normals_cube": flipped_normals_cube(),
        "internal_wall_cube": cube_with_internal_wall(),
        "open_box": open_box(),
        "nested_cubes": nested_cubes(),
        "stairs": stairs(),
        "hex_prism": hexagonal_prism(),
        "tilted_cube": tilted_cube(),
        "small_torus": torus(0.4, 0.08, 48, 16),
        "single_triangle": TriangleMesh(np.array([[0, 0, 0], [1, 0, 0], [0.3, 0.8, 0.1]]), np.array([[0, 1, 2]])),
        "coarse_sphere": icosphere(1, 0.5),
        "soup_small": random_soup(60, seed=7, size=0.4),
        "flat_box": box((-0.5, -0.5, -0.1), (0.5, 0.5, 0.1)),
        "long_bar": box((-0.5, -0.05, -0.05), (0.5, 0.05, 0.05)),
        "two_spheres": merge(icosphere(2, 0.3, (-0.4, 0, 0)), icosphere(2, 0.3, (0.4, 0, 0))),
    }
