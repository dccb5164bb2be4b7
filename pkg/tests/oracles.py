"""Slow, independent reference implementations used to check the fast kernels.

Nothing here imports the package's numeric kernels: every oracle is written
from scratch with plain numpy loops so a shared bug cannot hide.
"""

from __future__ import annotations

import itertools

import numpy as np

TOL_FEAT = 1e-7


def _seg_closest(p, a, b):
    ab = b - a
    L = ab @ ab
    t = 0.0 if L == 0 else float(np.clip((p - a) @ ab / L, 0.0, 1.0))
    q = a + t * ab
    return q, float((p - q) @ (p - q))


def closest_on_triangle(p, tri):
    """Closest point by plane projection, falling back to the three sides."""
    a, b, c = tri
    n = np.cross(b - a, c - a)
    nn = n @ n
    longest = max((b - a) @ (b - a), (c - b) @ (c - b), (a - c) @ (a - c))
    if np.sqrt(nn) > 1e-10 * longest:
        q = p - ((p - a) @ n) / nn * n
        # barycentrics by signed sub-areas
        wa = np.cross(c - b, q - b) @ n / nn
        wb = np.cross(a - c, q - c) @ n / nn
        wc = 1.0 - wa - wb
        if wa >= 0 and wb >= 0 and wc >= 0:
            return q, float((p - q) @ (p - q))
    best = None
    for u, v in ((a, b), (b, c), (c, a)):
        q, d2 = _seg_closest(p, u, v)
        if best is None or d2 < best[1]:
            best = (q, d2)
    return best


def barycentric(q, tri):
    a, b, c = tri
    m = np.stack([a - c, b - c], axis=1)
    uv, *_ = np.linalg.lstsq(m, q - c, rcond=None)
    return np.array([uv[0], uv[1], 1.0 - uv[0] - uv[1]])


def nearest_scan(p, tris):
    """(triangle id, closest point, distance) by exhaustive scan; ties to the lowest id."""
    best_t, best_q, best_d2 = -1, None, np.inf
    for t, tri in enumerate(tris):
        q, d2 = closest_on_triangle(p, tri)
        if d2 < best_d2:
            best_t, best_q, best_d2 = t, q, d2
    return best_t, best_q, np.sqrt(best_d2)


class WeldedAdjacency:
    """Edge and vertex incidence by exact position, built with dictionaries."""

    def __init__(self, positions, triangles):
        ids = {}
        self.welded = np.array([[ids.setdefault(tuple(positions[v]), len(ids)) for v in t] for t in triangles])
        self.edges: dict = {}
        self.verts: dict = {}
        for t, (a, b, c) in enumerate(self.welded):
            for u, v in ((a, b), (b, c), (c, a)):
                self.edges.setdefault(frozenset((u, v)), set()).add(t)
            for u in (a, b, c):
                self.verts.setdefault(u, set()).add(t)

    def incident(self, t, bary, tol=TOL_FEAT):
        zero = [b <= tol for b in bary]
        nz = sum(zero)
        w = self.welded[t]
        if nz == 0:
            return {t}
        if nz == 1:
            k = zero.index(True)
            return set(self.edges[frozenset((w[(k + 1) % 3], w[(k + 2) % 3]))])
        k = zero.index(False)
        return set(self.verts[w[k]])


def plane_of(tri):
    n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
    L = np.linalg.norm(n)
    longest = max(np.linalg.norm(tri[1] - tri[0]), np.linalg.norm(tri[2] - tri[1]), np.linalg.norm(tri[0] - tri[2]))
    if L <= 1e-10 * longest**2:
        return None
    n = n / L
    return n, float(n @ tri[0])


def scan_distances(points, tris, chunk=64):
    """(nearest triangle id, squared distance) for many points, vectorized over all pairs."""
    points = np.asarray(points, float)
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    n = np.cross(b - a, c - a)
    nn = np.einsum("ij,ij->i", n, n)
    longest = np.max([np.einsum("ij,ij->i", u - v, u - v) for u, v in ((b, a), (c, b), (a, c))], axis=0)
    flat = np.sqrt(nn) > 1e-10 * longest
    nn_safe = np.where(flat, nn, 1.0)
    out_t = np.empty(len(points), int)
    out_d2 = np.empty(len(points))
    for lo in range(0, len(points), chunk):
        p = points[lo:lo + chunk, None, :]
        s = np.einsum("ntj,tj->nt", p - a, n) / nn_safe
        q = p - s[..., None] * n
        wa = np.einsum("ntj,tj->nt", np.cross(c - b, q - b), n) / nn_safe
        wb = np.einsum("ntj,tj->nt", np.cross(a - c, q - c), n) / nn_safe
        wc = 1 - wa - wb
        inside = flat & (wa >= 0) & (wb >= 0) & (wc >= 0)
        best = np.where(inside, s * s * nn, np.inf)
        for u, v in ((a, b), (b, c), (c, a)):
            e = v - u
            ee = np.einsum("ij,ij->i", e, e)
            t = np.clip(np.einsum("ntj,tj->nt", p - u, e) / np.where(ee > 0, ee, 1.0), 0, 1)
            r = p - (u + t[..., None] * e)
            best = np.minimum(best, np.einsum("ntj,ntj->nt", r, r))
        out_t[lo:lo + chunk] = np.argmin(best, axis=1)
        out_d2[lo:lo + chunk] = best[np.arange(len(best)), out_t[lo:lo + chunk]]
    return out_t, out_d2


def linf_scan_many(points, positions, triangles, tol=TOL_FEAT):
    """L-infinity and Euclidean distances for many points by exhaustive scan + dictionary adjacency."""
    tris = positions[triangles]
    adj = WeldedAdjacency(positions, triangles)
    planes = [plane_of(t) for t in tris]
    ts, d2 = scan_distances(points, tris)
    linf = np.empty(len(points))
    for n, (p, t) in enumerate(zip(points, ts)):
        q, _ = closest_on_triangle(p, tris[t])
        inc = adj.incident(t, barycentric(q, tris[t]), tol)
        vals = [abs(planes[i][0] @ p - planes[i][1]) for i in inc if planes[i] is not None]
        linf[n] = max(vals) if vals else np.sqrt(d2[n])
    return linf, np.sqrt(d2), ts


def linf_scan(p, positions, triangles, adjacency=None):
    """(L-infinity distance, Euclidean distance, incident set) from the exhaustive scan."""
    tris = positions[triangles]
    adjacency = adjacency or WeldedAdjacency(positions, triangles)
    t, q, d = nearest_scan(p, tris)
    inc = adjacency.incident(t, barycentric(q, tris[t]))
    vals = []
    for i in inc:
        pl = plane_of(tris[i])
        if pl is not None:
            vals.append(abs(pl[0] @ p - pl[1]))
    return (max(vals) if vals else d), d, inc


def tri_box_overlap_sampled(center, half, tri):
    """Separating-axis test written out over all 13 candidate axes."""
    v = np.asarray(tri, float) - center
    e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]]
    axes = [np.eye(3)[i] for i in range(3)] + [np.cross(e[0], e[1])]
    axes += [np.cross(np.eye(3)[i], ej) for i in range(3) for ej in e]
    for ax in axes:
        if ax @ ax < 1e-30:
            continue
        proj = v @ ax
        r = half * np.abs(ax).sum()
        if proj.min() > r or proj.max() < -r:
            return False
    return True


def active_cells_scan(positions, triangles, R, eps, pad=0.0):
    """Cells whose eps-dilated box overlaps a triangle: every cell near every triangle, all 13 axes."""
    h = 2.0 / R
    half = h / 2 + eps + pad
    out = set()
    for tri in positions[triangles]:
        lo = np.clip(np.floor((tri.min(axis=0) - eps + 1) / h).astype(int) - 1, 0, R - 1)
        hi = np.clip(np.floor((tri.max(axis=0) + eps + 1) / h).astype(int) + 1, 0, R - 1)
        ijk = np.stack(np.meshgrid(*(np.arange(lo[a], hi[a] + 1) for a in range(3)), indexing="ij"), -1)
        ijk = ijk.reshape(-1, 3)
        v = tri[None, :, :] - (ijk * h - 1 + h / 2)[:, None, :]
        e = [tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2]]
        axes = [np.eye(3)[i] for i in range(3)] + [np.cross(e[0], e[1])]
        axes += [np.cross(np.eye(3)[i], ej) for i in range(3) for ej in e]
        keep = np.ones(len(ijk), bool)
        for ax in axes:
            if ax @ ax < 1e-30:
                continue
            proj = v @ ax
            r = half * np.abs(ax).sum()
            keep &= ~((proj.min(axis=1) > r) | (proj.max(axis=1) < -r))
        out.update(map(tuple, ijk[keep].tolist()))
    return out


def cell_components(byte):
    """Dual-vertex count of a cell: occupied plus unoccupied corner components minus one.

    Corners on an ambiguous face are joined across that face's diagonal that
    does not contain the face's lowest corner index (the one that is cut off).
    """
    corners = list(itertools.product((0, 1), repeat=3))
    idx = {c: c[0] + 2 * c[1] + 4 * c[2] for c in corners}
    occ = {c: (byte >> idx[c]) & 1 for c in corners}
    if all(occ.values()) or not any(occ.values()):
        return 0
    parent = {c: c for c in corners}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for c in corners:
        for a in range(3):
            if c[a] == 0:
                d = list(c)
                d[a] = 1
                d = tuple(d)
                if occ[c] == occ[d]:
                    parent[find(c)] = find(d)
    for a in range(3):
        for s in (0, 1):
            face = [c for c in corners if c[a] == s]
            face.sort(key=lambda c: idx[c])
            m = face[0]
            opp = [c for c in face if sum(abs(x - y) for x, y in zip(c, m)) == 2][0]
            others = [c for c in face if c not in (m, opp)]
            if occ[m] == occ[opp] and occ[others[0]] == occ[others[1]] and occ[m] != occ[others[0]]:
                # the lowest corner is isolated; the other diagonal is connected
                parent[find(others[0])] = find(others[1])
    roots = {find(c) for c in corners}
    return len(roots) - 1
