"""Triangle BVH with exact nearest-point queries and welded incidence sets."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from numba import njit

from .errors import EmptyMesh
from .mesh import TriangleMesh, unique_rows

LEAF_SIZE = 4
TOL_FEAT = 1e-7
STACK_SIZE = 128


class Feature(IntEnum):
    FACE = 0
    EDGE = 1
    VERTEX = 2


@dataclass(frozen=True)
class NearestHit:
    point: np.ndarray
    triangle_id: int
    barycentric: np.ndarray
    distance: float
    feature: Feature
    local_id: int  # local edge (v_i, v_{i+1}) or local vertex; -1 for FACE


class TriangleBVH:
    """Median-split bounding volume hierarchy over the triangles of a mesh.

    Also carries the welded-vertex adjacency (edge -> triangles, vertex ->
    triangles) used to build incident sets, so duplicated vertices in a
    soup still produce complete one-rings.
    """

    def __init__(self, mesh: TriangleMesh, leaf_size: int = LEAF_SIZE):
        if mesh.n_triangles == 0:
            raise EmptyMesh("cannot build a BVH over zero triangles")
        self.mesh = mesh
        self.leaf_size = leaf_size
        tri_v = np.ascontiguousarray(mesh.corners())
        self.tri_v = tri_v
        cross = np.cross(tri_v[:, 1] - tri_v[:, 0], tri_v[:, 2] - tri_v[:, 0])
        clen = np.linalg.norm(cross, axis=1)
        longest = np.max(np.linalg.norm(tri_v - np.roll(tri_v, 1, axis=1), axis=2), axis=1)
        self.nondegenerate = clen > 1e-10 * longest**2
        self._build_nodes(tri_v)
        self._build_adjacency(mesh)

    # -- construction ---------------------------------------------------
    def _build_nodes(self, tri_v):
        lo_t = tri_v.min(axis=1)
        hi_t = tri_v.max(axis=1)
        cent = tri_v.mean(axis=1)
        order = np.arange(len(tri_v), dtype=np.int64)
        lo_n, hi_n, left, right, start, count = [], [], [], [], [], []
        stack = [(0, len(order), -1, False)]
        while stack:
            s, e, parent, is_right = stack.pop()
            node = len(lo_n)
            idx = order[s:e]
            lo_n.append(lo_t[idx].min(axis=0))
            hi_n.append(hi_t[idx].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(s)
            count.append(e - s)
            if parent >= 0:
                (right if is_right else left)[parent] = node
            if e - s <= self.leaf_size:
                continue
            axis = int(np.argmax(hi_n[node] - lo_n[node]))
            perm = np.lexsort((idx, cent[idx, axis]))
            order[s:e] = idx[perm]
            mid = s + (e - s) // 2
            count[node] = 0
            # right pushed first so the left subtree is numbered first
            stack.append((mid, e, node, True))
            stack.append((s, mid, node, False))
        self.order = order
        self.node_lo = np.array(lo_n, dtype=np.float64)
        self.node_hi = np.array(hi_n, dtype=np.float64)
        self.node_left = np.array(left, dtype=np.int64)
        self.node_right = np.array(right, dtype=np.int64)
        self.node_start = np.array(start, dtype=np.int64)
        self.node_count = np.array(count, dtype=np.int64)

    def _build_adjacency(self, mesh):
        _, inv = unique_rows(mesh.positions)
        wv = inv[mesh.triangles].astype(np.int64)
        self.welded = np.ascontiguousarray(wv)
        nw = int(wv.max()) + 1
        self.n_welded = nw
        tri_ids = np.arange(len(wv), dtype=np.int64)

        a = wv.reshape(-1)
        b = wv[:, [1, 2, 0]].reshape(-1)
        keys = np.minimum(a, b) * nw + np.maximum(a, b)
        owner = np.repeat(tri_ids, 3)
        o = np.lexsort((owner, keys))
        keys, owner = keys[o], owner[o]
        # drop repeated (edge, triangle) pairs from index-degenerate triangles
        keep = np.ones(len(keys), bool)
        keep[1:] = (keys[1:] != keys[:-1]) | (owner[1:] != owner[:-1])
        keys, owner = keys[keep], owner[keep]
        self.edge_keys, first = np.unique(keys, return_index=True)
        self.edge_ptr = np.append(first, len(keys)).astype(np.int64)
        self.edge_tris = owner

        vk = wv.reshape(-1)
        vo = np.repeat(tri_ids, 3)
        o = np.lexsort((vo, vk))
        vk, vo = vk[o], vo[o]
        keep = np.ones(len(vk), bool)
        keep[1:] = (vk[1:] != vk[:-1]) | (vo[1:] != vo[:-1])
        vk, vo = vk[keep], vo[keep]
        self.vert_ptr = np.searchsorted(vk, np.arange(nw + 1)).astype(np.int64)
        self.vert_tris = vo

    # -- numba argument packs -------------------------------------------
    @property
    def arrays(self):
        return (self.tri_v, self.node_lo, self.node_hi, self.node_left, self.node_right,
                self.node_start, self.node_count, self.order, self.nondegenerate)

    @property
    def adjacency(self):
        return (self.welded, self.edge_keys, self.edge_ptr, self.edge_tris,
                self.vert_ptr, self.vert_tris, self.n_welded)

    def depth(self) -> int:
        best = 0
        stack = [(0, 1)]
        while stack:
            n, d = stack.pop()
            best = max(best, d)
            if self.node_left[n] >= 0:
                stack.append((int(self.node_left[n]), d + 1))
                stack.append((int(self.node_right[n]), d + 1))
        return best

    def leaves(self):
        """Triangle id arrays of the leaves in traversal (preorder) order."""
        out = []
        stack = [0]
        while stack:
            n = stack.pop()
            if self.node_left[n] < 0:
                s = self.node_start[n]
                out.append(self.order[s:s + self.node_count[n]].copy())
            else:
                stack.append(int(self.node_right[n]))
                stack.append(int(self.node_left[n]))
        return out


def build_bvh(mesh: TriangleMesh, leaf_size: int = LEAF_SIZE) -> TriangleBVH:
    return TriangleBVH(mesh, leaf_size)


# ---------------------------------------------------------------- kernels

@njit(cache=True, nogil=True, inline="always")
def _closest_on_segment(px, py, pz, ax, ay, az, bx, by, bz):
    dx, dy, dz = bx - ax, by - ay, bz - az
    ll = dx * dx + dy * dy + dz * dz
    t = 0.0
    if ll > 0.0:
        t = ((px - ax) * dx + (py - ay) * dy + (pz - az) * dz) / ll
        t = min(max(t, 0.0), 1.0)
    qx, qy, qz = ax + t * dx, ay + t * dy, az + t * dz
    return t, (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2


@njit(cache=True, nogil=True)
def closest_point_triangle(px, py, pz, tv, ok):
    """Barycentrics (u, v, w) of the closest point of triangle ``tv`` (3x3) and squared distance."""
    return _closest(px, py, pz, tv[0, 0], tv[0, 1], tv[0, 2], tv[1, 0], tv[1, 1], tv[1, 2],
                    tv[2, 0], tv[2, 1], tv[2, 2], ok)


@njit(cache=True, nogil=True, inline="always")
def _closest_idx(px, py, pz, tri_v, t, ok):
    return _closest(px, py, pz, tri_v[t, 0, 0], tri_v[t, 0, 1], tri_v[t, 0, 2], tri_v[t, 1, 0],
                    tri_v[t, 1, 1], tri_v[t, 1, 2], tri_v[t, 2, 0], tri_v[t, 2, 1], tri_v[t, 2, 2], ok[t])


@njit(cache=True, nogil=True)
def _closest(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz, ok):
    if not ok:
        # degenerate: best of the three sides
        t0, d0 = _closest_on_segment(px, py, pz, ax, ay, az, bx, by, bz)
        t1, d1 = _closest_on_segment(px, py, pz, bx, by, bz, cx, cy, cz)
        t2, d2 = _closest_on_segment(px, py, pz, cx, cy, cz, ax, ay, az)
        if d0 <= d1 and d0 <= d2:
            return 1.0 - t0, t0, 0.0, d0
        if d1 <= d2:
            return 0.0, 1.0 - t1, t1, d1
        return t2, 0.0, 1.0 - t2, d2
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    u, v, w = 1.0, 0.0, 0.0
    done = False
    if d1 <= 0.0 and d2 <= 0.0:
        done = True
    if not done:
        bpx, bpy, bpz = px - bx, py - by, pz - bz
        d3 = abx * bpx + aby * bpy + abz * bpz
        d4 = acx * bpx + acy * bpy + acz * bpz
        if d3 >= 0.0 and d4 <= d3:
            u, v, w = 0.0, 1.0, 0.0
            done = True
    if not done:
        vc = d1 * d4 - d3 * d2
        if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            t = d1 / (d1 - d3)
            u, v, w = 1.0 - t, t, 0.0
            done = True
    if not done:
        cpx, cpy, cpz = px - cx, py - cy, pz - cz
        d5 = abx * cpx + aby * cpy + abz * cpz
        d6 = acx * cpx + acy * cpy + acz * cpz
        if d6 >= 0.0 and d5 <= d6:
            u, v, w = 0.0, 0.0, 1.0
            done = True
    if not done:
        vb = d5 * d2 - d1 * d6
        if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            t = d2 / (d2 - d6)
            u, v, w = 1.0 - t, 0.0, t
            done = True
    if not done:
        va = d3 * d6 - d5 * d4
        if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
            t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            u, v, w = 0.0, 1.0 - t, t
            done = True
    if not done:
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        u = 1.0 - v - w
    qx = u * ax + v * bx + w * cx
    qy = u * ay + v * by + w * cy
    qz = u * az + v * bz + w * cz
    return u, v, w, (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2


@njit(cache=True, nogil=True, inline="always")
def _box_d2(px, py, pz, lo, hi, n):
    dx = max(lo[n, 0] - px, 0.0, px - hi[n, 0])
    dy = max(lo[n, 1] - py, 0.0, py - hi[n, 1])
    dz = max(lo[n, 2] - pz, 0.0, pz - hi[n, 2])
    return dx * dx + dy * dy + dz * dz


@njit(cache=True, nogil=True)
def nearest_kernel(px, py, pz, bvh_arrays, hint, stack):
    """Exact nearest triangle: returns (tri, u, v, w, d2). Ties go to the lowest triangle id."""
    tri_v, node_lo, node_hi, node_left, node_right, node_start, node_count, order, ok = bvh_arrays
    best_t = -1
    best = np.inf
    bu = bv = bw = 0.0
    if hint >= 0:
        u, v, w, d2 = _closest_idx(px, py, pz, tri_v, hint, ok)
        best_t, best, bu, bv, bw = hint, d2, u, v, w
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        n = stack[sp]
        if _box_d2(px, py, pz, node_lo, node_hi, n) > best:
            continue
        l = node_left[n]
        if l < 0:
            s = node_start[n]
            for k in range(s, s + node_count[n]):
                t = order[k]
                u, v, w, d2 = _closest_idx(px, py, pz, tri_v, t, ok)
                if d2 < best or (d2 == best and t < best_t):
                    best_t, best, bu, bv, bw = t, d2, u, v, w
        else:
            r = node_right[n]
            dl = _box_d2(px, py, pz, node_lo, node_hi, l)
            dr = _box_d2(px, py, pz, node_lo, node_hi, r)
            if dl <= dr:
                stack[sp] = r
                stack[sp + 1] = l
            else:
                stack[sp] = l
                stack[sp + 1] = r
            sp += 2
    return best_t, bu, bv, bw, best


@njit(cache=True, nogil=True, inline="always")
def classify_feature(u, v, w, tol):
    """(feature, local id) from barycentrics: 0 FACE, 1 EDGE (v_i, v_i+1), 2 VERTEX."""
    zu = u <= tol
    zv = v <= tol
    zw = w <= tol
    nz = int(zu) + int(zv) + int(zw)
    if nz == 0:
        return 0, -1
    if nz == 1:
        # edge opposite the vanishing coordinate k is (k+1, k+2)
        if zu:
            return 1, 1
        if zv:
            return 1, 2
        return 1, 0
    if not zu:
        return 2, 0
    if not zv:
        return 2, 1
    return 2, 2


@njit(cache=True, nogil=True, inline="always")
def incident_range(t, feature, local, adjacency):
    """(source, lo, hi): triangles T(Q) are ``src[lo:hi]``; source 0 = self, 1 = edge list, 2 = vertex list."""
    welded, edge_keys, edge_ptr, edge_tris, vert_ptr, vert_tris, nw = adjacency
    if feature == 0:
        return 0, t, t + 1
    if feature == 1:
        a = welded[t, local]
        b = welded[t, (local + 1) % 3]
        key = min(a, b) * nw + max(a, b)
        e = np.searchsorted(edge_keys, key)
        return 1, edge_ptr[e], edge_ptr[e + 1]
    vtx = welded[t, local]
    return 2, vert_ptr[vtx], vert_ptr[vtx + 1]


@njit(cache=True, nogil=True)
def _nearest_batch(points, bvh_arrays, tol, out_t, out_bary, out_d, out_feat, out_local, lo, hi):
    stack = np.empty(STACK_SIZE, np.int64)
    hint = -1
    for i in range(lo, hi):
        t, u, v, w, d2 = nearest_kernel(points[i, 0], points[i, 1], points[i, 2], bvh_arrays, hint, stack)
        hint = t
        out_t[i] = t
        out_bary[i, 0] = u
        out_bary[i, 1] = v
        out_bary[i, 2] = w
        out_d[i] = np.sqrt(d2)
        f, loc = classify_feature(u, v, w, tol)
        out_feat[i] = f
        out_local[i] = loc


def nearest_points(bvh: TriangleBVH, points, tol_feat: float = TOL_FEAT):
    """Vectorized nearest query: (tri, bary, dist, feature, local) arrays."""
    from .parallel import run_chunked

    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    n = len(pts)
    out_t = np.empty(n, np.int64)
    out_bary = np.empty((n, 3))
    out_d = np.empty(n)
    out_feat = np.empty(n, np.int64)
    out_local = np.empty(n, np.int64)
    arrays = bvh.arrays
    run_chunked(lambda lo, hi: _nearest_batch(pts, arrays, tol_feat, out_t, out_bary, out_d,
                                              out_feat, out_local, lo, hi), n)
    return out_t, out_bary, out_d, out_feat, out_local


def nearest_point(bvh: TriangleBVH, p, tol_feat: float = TOL_FEAT) -> NearestHit:
    t, bary, d, feat, loc = nearest_points(bvh, np.asarray(p, dtype=np.float64).reshape(1, 3), tol_feat)
    t0 = int(t[0])
    q = bary[0] @ bvh.tri_v[t0]
    return NearestHit(q, t0, bary[0].copy(), float(d[0]), Feature(int(feat[0])), int(loc[0]))


def incident_triangles(bvh: TriangleBVH, hit: NearestHit, tol_feat: float = TOL_FEAT) -> frozenset:
    """T(Q): triangles incident to the nearest point's feature (welded adjacency)."""
    u, v, w = hit.barycentric
    feature, local = classify_feature(float(u), float(v), float(w), tol_feat)
    src, lo, hi = incident_range(hit.triangle_id, feature, local, bvh.adjacency)
    if src == 0:
        return frozenset({hit.triangle_id})
    arr = bvh.edge_tris if src == 1 else bvh.vert_tris
    return frozenset(int(x) for x in arr[lo:hi])
