"""Cell case table for manifold dual marching cubes.

Local corner ``c = x + 2y + 4z``. Local edge ``e = 4a + p + 2q`` runs along
axis ``a`` at coordinate ``p`` on axis ``(a+1) % 3`` and ``q`` on axis
``(a+2) % 3``. Bit ``c`` of an occupancy byte is corner ``c``.
"""

from __future__ import annotations

import numpy as np


def _corner(x: int, y: int, z: int) -> int:
    return x + 2 * y + 4 * z


def _edge_corners(e: int) -> tuple[int, int]:
    a, r = divmod(e, 4)
    p, q = r & 1, r >> 1
    lo = [0, 0, 0]
    lo[(a + 1) % 3] = p
    lo[(a + 2) % 3] = q
    hi = list(lo)
    hi[a] = 1
    return _corner(*lo), _corner(*hi)


EDGE_CORNERS = np.array([_edge_corners(e) for e in range(12)], dtype=np.int64)


def _face_tables():
    """For each face (axis, side): its corners and its edges."""
    corners, edges = [], []
    for a in range(3):
        for s in range(2):
            fc = [c for c in range(8) if (c >> a) & 1 == s]
            fe = [e for e in range(12) if all((c >> a) & 1 == s for c in EDGE_CORNERS[e])]
            corners.append(fc)
            edges.append(fe)
    return np.array(corners, dtype=np.int64), np.array(edges, dtype=np.int64)


FACE_CORNERS, FACE_EDGES = _face_tables()


def crossing_edges(byte: int) -> list[int]:
    return [e for e in range(12)
            if ((byte >> EDGE_CORNERS[e, 0]) & 1) != ((byte >> EDGE_CORNERS[e, 1]) & 1)]


def ambiguous_faces(byte: int) -> list[int]:
    """Faces whose four corners alternate in occupancy around the face."""
    out = []
    for f in range(6):
        occ = [(byte >> c) & 1 for c in FACE_CORNERS[f]]
        if len(set(occ)) == 2 and sum(
                1 for e in FACE_EDGES[f] if e in crossing_edges(byte)) == 4:
            out.append(f)
    return out


def _components(byte: int) -> list[list[int]]:
    cross = crossing_edges(byte)
    parent = {e: e for e in cross}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[max(rx, ry)] = min(rx, ry)

    for f in range(6):
        fe = [e for e in FACE_EDGES[f] if e in parent]
        if len(fe) == 2:
            union(fe[0], fe[1])
        elif len(fe) == 4:
            # ambiguous face: cut off the face's lowest-numbered corner, whatever its sign
            m = int(FACE_CORNERS[f].min())
            near = [e for e in fe if m in EDGE_CORNERS[e]]
            far = [e for e in fe if m not in EDGE_CORNERS[e]]
            union(near[0], near[1])
            union(far[0], far[1])
    groups: dict[int, list[int]] = {}
    for e in cross:
        groups.setdefault(find(e), []).append(e)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def _build():
    n_comp = np.zeros(256, dtype=np.int64)
    edge_comp = np.full((256, 12), -1, dtype=np.int64)
    for b in range(256):
        comps = _components(b)
        n_comp[b] = len(comps)
        for ci, comp in enumerate(comps):
            for e in comp:
                edge_comp[b, e] = ci
    return n_comp, edge_comp


N_COMPONENTS, EDGE_COMPONENT = _build()


def components(byte: int) -> list[list[int]]:
    """Crossing-edge groups of a cell, ordered by their lowest edge id."""
    return _components(int(byte))


def vertex_count(byte: int) -> int:
    return int(N_COMPONENTS[byte])
