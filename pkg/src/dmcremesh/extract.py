"""Manifold dual marching cubes over a classified corner grid.

One quad per crossing grid edge, joining the dual vertices of the four
cells around it; each cell hosts one vertex per crossing-edge component of
its case. Connectivity depends on the occupancy bytes alone, which is what
lets the codec drop it entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import BoundaryNotExterior, InconsistentRecords, NoSignChange
from .field import STACK_SIZE, LinfField, field_kernel, occupied_kernel
from .mesh import NormalizationTransform, Provenance, TriangleMesh
from .parallel import run_chunked
from .tables import EDGE_COMPONENT, EDGE_CORNERS, N_COMPONENTS
from .voxelize import (BLOCK, BLOCK_CORNERS, CLASS_MASK, OCC_BIT, SparseCornerGrid, corner_index)

DEFAULT_ITERS = 12
OFFSET_MAX = 1.0 - 2.0**-30  # keeps dual vertices strictly inside their cell
QEF_CUTOFF = 0.01  # relative eigenvalue cutoff (0.1 on singular values)
MORTON_BITS = 10


@dataclass
class ExtractConfig:
    iters: int = DEFAULT_ITERS
    refine: bool = False
    placement: str = "qef"  # or "centroid"
    repair: bool = True


@dataclass(eq=False)
class DMCMesh:
    """Per-voxel records plus the assembled triangle mesh (normalized coordinates)."""

    resolution: int
    coords: np.ndarray  # (N, 3) cell coordinates, Morton order
    occupancy: np.ndarray  # (N,) uint8
    vertex_ptr: np.ndarray  # (N + 1,) prefix sum of per-record vertex counts
    offsets: np.ndarray  # (V, 3) in-cell offsets in [0, 1)
    tri_bits: np.ndarray  # (N,) uint8, bit a = diagonal choice of the owned axis-a quad
    assembled: TriangleMesh
    transform: NormalizationTransform = field(default_factory=NormalizationTransform)
    stats: dict = field(default_factory=dict)

    @property
    def n_records(self) -> int:
        return len(self.coords)

    @property
    def h(self) -> float:
        return 2.0 / self.resolution

    def record(self, n: int):
        s, e = self.vertex_ptr[n], self.vertex_ptr[n + 1]
        return (tuple(int(v) for v in self.coords[n]), int(self.occupancy[n]),
                self.offsets[s:e].copy(), int(self.tri_bits[n]))

    def to_source_units(self) -> TriangleMesh:
        m = self.assembled
        return TriangleMesh(self.transform.invert(m.positions), m.triangles, Provenance(None, None))


# ------------------------------------------------------------ morton

@njit(cache=True, nogil=True, inline="always")
def _spread(x):
    x &= 0x3FF
    x = (x | (x << 16)) & 0x030000FF
    x = (x | (x << 8)) & 0x0300F00F
    x = (x | (x << 4)) & 0x030C30C3
    x = (x | (x << 2)) & 0x09249249
    return x


@njit(cache=True, nogil=True, inline="always")
def morton3(i, j, k):
    return _spread(i) | (_spread(j) << 1) | (_spread(k) << 2)


@njit(cache=True)
def morton_codes(ijk):
    out = np.empty(ijk.shape[0], np.int64)
    for n in range(ijk.shape[0]):
        out[n] = morton3(ijk[n, 0], ijk[n, 1], ijk[n, 2])
    return out


# ------------------------------------------------------------ occupancy access

@njit(cache=True, nogil=True, inline="always")
def _occ(i, j, k, R, nb, block_slot, st, labels, label_ext):
    if i < 0 or j < 0 or k < 0 or i > R or j > R or k > R:
        return 0
    c = corner_index(i, j, k, nb, block_slot)
    if c >= 0:
        return 1 if st[c] & OCC_BIT else 0
    return 0 if label_ext[labels[-1 - c]] else 1


@njit(cache=True)
def _corner_ijk(c, slot_block, nb):
    s = c // BLOCK_CORNERS
    loc = c % BLOCK_CORNERS
    blk = slot_block[s]
    i = (blk // (nb * nb)) * BLOCK + loc // (BLOCK * BLOCK)
    j = ((blk // nb) % nb) * BLOCK + (loc // BLOCK) % BLOCK
    k = (blk % nb) * BLOCK + loc % BLOCK
    return i, j, k


@njit(cache=True, inline="always")
def _shift(i, j, k, a, d):
    return i + d * (a == 0), j + d * (a == 1), k + d * (a == 2)


@njit(cache=True, inline="always")
def _interior(i, j, k, R):
    return 0 < i < R and 0 < j < R and 0 < k < R


@njit(cache=True)
def _repair_pass(R, nb, block_slot, slot_block, st, labels, label_ext):
    """Flip one unoccupied corner of every ambiguous face to occupied; returns flips made."""
    flips = 0
    for c in range(st.shape[0]):
        i, j, k = _corner_ijk(c, slot_block, nb)
        if i > R or j > R or k > R:
            continue
        for a in range(3):
            b = (a + 1) % 3
            cc = (a + 2) % 3
            # face corners p, q1 = p + e_b, q2 = p + e_c, q3 = p + e_b + e_c
            i1, j1, k1 = _shift(i, j, k, b, 1)
            i2, j2, k2 = _shift(i, j, k, cc, 1)
            i3, j3, k3 = _shift(i1, j1, k1, cc, 1)
            if i3 > R or j3 > R or k3 > R:
                continue
            o0 = _occ(i, j, k, R, nb, block_slot, st, labels, label_ext)
            o3 = _occ(i3, j3, k3, R, nb, block_slot, st, labels, label_ext)
            if o0 != o3:
                continue
            o1 = _occ(i1, j1, k1, R, nb, block_slot, st, labels, label_ext)
            if o0 == o1:
                continue
            o2 = _occ(i2, j2, k2, R, nb, block_slot, st, labels, label_ext)
            if o1 != o2:
                continue
            # the two unoccupied corners are diagonal; flip the first one not on the boundary
            if o0 == 0:
                xa, ya, za, xb, yb, zb = i, j, k, i3, j3, k3
            else:
                xa, ya, za, xb, yb, zb = i1, j1, k1, i2, j2, k2
            if _interior(xa, ya, za, R):
                ci = corner_index(xa, ya, za, nb, block_slot)
            elif _interior(xb, yb, zb, R):
                ci = corner_index(xb, yb, zb, nb, block_slot)
            else:
                continue
            st[ci] = (st[ci] & CLASS_MASK) | OCC_BIT
            flips += 1
    return flips


@njit(cache=True)
def _find_edges(R, nb, block_slot, slot_block, st, labels, label_ext):
    """Canonical keys ((a (R+1) + i) (R+1) + j) (R+1) + k of crossing edges; -1 on a bad boundary."""
    R1 = R + 1
    cap = 1024
    out = np.empty(cap, np.int64)
    n = 0
    bad = 0
    for c in range(st.shape[0]):
        i, j, k = _corner_ijk(c, slot_block, nb)
        if i > R or j > R or k > R:
            continue
        o = 1 if st[c] & OCC_BIT else 0
        if o and (i == 0 or j == 0 or k == 0 or i == R or j == R or k == R):
            bad += 1
        for a in range(3):
            ni = i + (a == 0)
            nj = j + (a == 1)
            nk = k + (a == 2)
            if ni > R or nj > R or nk > R:
                continue
            if _occ(ni, nj, nk, R, nb, block_slot, st, labels, label_ext) != o:
                if n == cap:
                    cap *= 2
                    tmp = np.empty(cap, np.int64)
                    tmp[:n] = out[:n]
                    out = tmp
                out[n] = ((a * R1 + i) * R1 + j) * R1 + k
                n += 1
    return out[:n], bad


def edge_keys_decode(keys, R: int):
    R1 = R + 1
    keys = np.asarray(keys, dtype=np.int64)
    return keys // R1**3, np.stack([(keys // R1**2) % R1, (keys // R1) % R1, keys % R1], axis=1)


def find_crossing_edges(grid: SparseCornerGrid, st=None) -> np.ndarray:
    """Sorted canonical keys of edges whose endpoint occupancies differ (see :func:`edge_keys_decode`)."""
    st = grid.state if st is None else st
    keys, bad = _find_edges(grid.resolution, grid.nb, grid.block_slot, grid.slot_block, st,
                            grid.labels, grid.label_ext)
    if bad:
        raise BoundaryNotExterior(f"{bad} domain-boundary corners are occupied")
    return np.sort(keys)


# ------------------------------------------------------------ crossings

@njit(cache=True, nogil=True)
def bisect_kernel(ax, ay, az, bx, by, bz, fa, mode, eps, iters, stack):
    """Parameter t in (0, 1) of the occupancy change from occupied ``a`` to unoccupied ``b``.

    The result is the midpoint of a width 2^-iters dyadic bracket whose ends
    differ in occupancy. The field is planar near ``b`` almost everywhere, so
    the bracket is first guessed from the plane active at ``b`` and confirmed
    with two evaluations; plain bisection runs only when the guess fails. With
    a single occupancy change on the edge both routes give the same bracket.
    """
    step = 2.0**-iters
    lo = 0.0
    hi = 1.0
    hint = -1
    d, gx, gy, gz, hint = field_kernel(bx, by, bz, fa, mode, hint, stack)
    slope = gx * (bx - ax) + gy * (by - ay) + gz * (bz - az)
    if slope > 0.0 and d > eps:
        ts = 1.0 - (d - eps) / slope
        if 0.0 < ts < 1.0:
            m = np.floor(ts / step)
            m = min(max(m, 0.0), 1.0 / step - 1.0)
            glo = m * step
            ghi = glo + step
            ok = True
            if glo > 0.0:
                ok, hint = occupied_kernel(ax + glo * (bx - ax), ay + glo * (by - ay), az + glo * (bz - az),
                                           fa, mode, eps, hint, stack)
            if ok and ghi < 1.0:
                inside, hint = occupied_kernel(ax + ghi * (bx - ax), ay + ghi * (by - ay),
                                               az + ghi * (bz - az), fa, mode, eps, hint, stack)
                ok = not inside
            if ok:
                t = glo + 0.5 * step
                return min(max(t, step), 1.0 - step)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside, hint = occupied_kernel(ax + mid * (bx - ax), ay + mid * (by - ay), az + mid * (bz - az),
                                       fa, mode, eps, hint, stack)
        if inside:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    return min(max(t, step), 1.0 - step)


@njit(cache=True, nogil=True)
def _crossings(edge_a, edge_p, occ_lo, h, fa, mode, eps, iters, has_field, out_p, out_n, lo, hi):
    stack = np.empty(STACK_SIZE, np.int64)
    for n in range(lo, hi):
        a = edge_a[n]
        px = edge_p[n, 0] * h - 1.0
        py = edge_p[n, 1] * h - 1.0
        pz = edge_p[n, 2] * h - 1.0
        qx = px + h * (a == 0)
        qy = py + h * (a == 1)
        qz = pz + h * (a == 2)
        if not has_field:
            t = 0.5
        elif occ_lo[n]:
            t = bisect_kernel(px, py, pz, qx, qy, qz, fa, mode, eps, iters, stack)
        else:
            t = 1.0 - bisect_kernel(qx, qy, qz, px, py, pz, fa, mode, eps, iters, stack)
        x = px + t * (qx - px)
        y = py + t * (qy - py)
        z = pz + t * (qz - pz)
        out_p[n, 0] = x
        out_p[n, 1] = y
        out_p[n, 2] = z
        if has_field:
            d, gx, gy, gz, tt = field_kernel(x, y, z, fa, mode, -1, stack)
            out_n[n, 0] = gx
            out_n[n, 1] = gy
            out_n[n, 2] = gz
        else:
            out_n[n, 0] = 0.0
            out_n[n, 1] = 0.0
            out_n[n, 2] = 0.0


def bisect_crossing(a, b, field: LinfField, iters: int = DEFAULT_ITERS, occupied_a: bool | None = None):
    """Occupancy change point on segment ab (exactly one endpoint occupied)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ga = field.epsilon - field.distance(a)[0]
    gb = field.epsilon - field.distance(b)[0]
    if occupied_a is None:
        if (ga >= 0) == (gb >= 0):
            raise NoSignChange("segment endpoints have the same occupancy")
        occupied_a = ga >= 0
    stack = np.empty(STACK_SIZE, np.int64)
    fa = field.arrays
    m = field.mode.value
    if occupied_a:
        t = bisect_kernel(*a, *b, fa, m, field.epsilon, iters, stack)
    else:
        t = 1.0 - bisect_kernel(*b, *a, fa, m, field.epsilon, iters, stack)
    return a + t * (b - a)


# ------------------------------------------------------------ vertex placement

@njit(cache=True, nogil=True)
def qef_solve(points, normals, count):
    """Least-squares point for planes (p_i, n_i), truncated toward the mass point."""
    mx = my = mz = 0.0
    for n in range(count):
        mx += points[n, 0]
        my += points[n, 1]
        mz += points[n, 2]
    mx /= count
    my /= count
    mz /= count
    A = np.zeros((3, 3))
    rhs = np.zeros(3)
    for n in range(count):
        nx, ny, nz = normals[n, 0], normals[n, 1], normals[n, 2]
        if nx == 0.0 and ny == 0.0 and nz == 0.0:
            continue
        r = nx * (points[n, 0] - mx) + ny * (points[n, 1] - my) + nz * (points[n, 2] - mz)
        nv = (nx, ny, nz)
        for i in range(3):
            rhs[i] += nv[i] * r
            for j in range(3):
                A[i, j] += nv[i] * nv[j]
    w, V = np.linalg.eigh(A)
    top = w[2]
    out = np.array([mx, my, mz])
    if top <= 0.0:
        return out
    for e in range(3):
        if w[e] > QEF_CUTOFF * top:
            c = (V[0, e] * rhs[0] + V[1, e] * rhs[1] + V[2, e] * rhs[2]) / w[e]
            out[0] += c * V[0, e]
            out[1] += c * V[1, e]
            out[2] += c * V[2, e]
    return out


@njit(cache=True, nogil=True)
def _sweep_axis(x, a, cell_lo, h, fa, mode, eps, iters, stack):
    """Move coordinate ``a`` of x onto the nearest occupancy change along the cell-spanning segment."""
    lo_a = cell_lo[a]
    hi_a = cell_lo[a] + h
    p = x.copy()
    gx = eps - field_kernel(p[0], p[1], p[2], fa, mode, -1, stack)[0]
    sx = gx >= 0.0
    p[a] = lo_a
    s0 = eps - field_kernel(p[0], p[1], p[2], fa, mode, -1, stack)[0] >= 0.0
    p[a] = hi_a
    s1 = eps - field_kernel(p[0], p[1], p[2], fa, mode, -1, stack)[0] >= 0.0
    down = s0 != sx
    up = s1 != sx
    if not down and not up:
        return x[a]
    if down and (not up or x[a] - lo_a <= hi_a - x[a]):
        lo, hi = lo_a, x[a]
        slo = s0
    else:
        lo, hi = x[a], hi_a
        slo = sx
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        p[a] = mid
        s = eps - field_kernel(p[0], p[1], p[2], fa, mode, -1, stack)[0] >= 0.0
        if s == slo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@njit(cache=True, nogil=True)
def _place(rec_ijk, rec_occ, vptr, edge_keys, cross_p, cross_n, R, h, placement, refine,
           fa, mode, eps, iters, out, lo, hi):
    R1 = R + 1
    pts = np.empty((12, 3))
    nrm = np.empty((12, 3))
    cell_lo = np.empty(3)
    stack = np.empty(STACK_SIZE, np.int64)
    for r in range(lo, hi):
        i, j, k = rec_ijk[r, 0], rec_ijk[r, 1], rec_ijk[r, 2]
        byte = rec_occ[r]
        cell_lo[0] = i * h - 1.0
        cell_lo[1] = j * h - 1.0
        cell_lo[2] = k * h - 1.0
        for comp in range(N_COMPONENTS[byte]):
            cnt = 0
            for e in range(12):
                if EDGE_COMPONENT[byte, e] != comp:
                    continue
                a = e >> 2
                p = e & 1
                q = (e >> 1) & 1
                ci, cj, ck = _shift(i, j, k, (a + 1) % 3, p)
                ci, cj, ck = _shift(ci, cj, ck, (a + 2) % 3, q)
                key = ((a * R1 + ci) * R1 + cj) * R1 + ck
                idx = np.searchsorted(edge_keys, key)
                pts[cnt] = cross_p[idx]
                nrm[cnt] = cross_n[idx]
                cnt += 1
            if placement == 0:
                x = qef_solve(pts, nrm, cnt)
            else:
                x = np.zeros(3)
                for n in range(cnt):
                    x += pts[n]
                x /= cnt
            for a in range(3):
                x[a] = min(max(x[a], cell_lo[a]), cell_lo[a] + h * OFFSET_MAX)
            if refine:
                for _ in range(2):
                    for a in range(3):
                        x[a] = _sweep_axis(x, a, cell_lo, h, fa, mode, eps, iters, stack)
                for a in range(3):
                    x[a] = min(max(x[a], cell_lo[a]), cell_lo[a] + h * OFFSET_MAX)
            v = vptr[r] + comp
            for a in range(3):
                off = (x[a] - cell_lo[a]) / h
                out[v, a] = min(max(off, 0.0), OFFSET_MAX)


def place_vertex(cell, component, crossings, field: LinfField | None = None, refine: bool = False,
                 normals=None, resolution: int | None = None, iters: int = DEFAULT_ITERS,
                 placement: str = "centroid"):
    """In-cell offset of one dual vertex from its component's crossing points (world coordinates).

    ``cell`` is the integer cell coordinate, ``crossings`` the (n, 3) crossing
    points; ``component`` is informational. QEF placement needs ``normals``.
    """
    R = resolution if resolution is not None else 1024
    h = 2.0 / R
    pts = np.asarray(crossings, dtype=np.float64).reshape(-1, 3)
    cell_lo = np.asarray(cell, dtype=np.float64) * h - 1.0
    if placement == "qef":
        nrm = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        x = qef_solve(pts, nrm, len(pts))
    else:
        x = pts.mean(axis=0)
    x = np.clip(x, cell_lo, cell_lo + h * OFFSET_MAX)
    if refine and field is not None:
        stack = np.empty(STACK_SIZE, np.int64)
        for _ in range(2):
            for a in range(3):
                x[a] = _sweep_axis(x, a, cell_lo, h, field.arrays, field.mode.value, field.epsilon,
                                   iters, stack)
        x = np.clip(x, cell_lo, cell_lo + h * OFFSET_MAX)
    return np.clip((x - cell_lo) / h, 0.0, OFFSET_MAX)


# ------------------------------------------------------------ assembly

@njit(cache=True)
def _owned_edges(rec_ijk, rec_occ, R):
    """Canonical keys of crossing edges owned (lower corner = cell origin) by the records."""
    R1 = R + 1
    out = np.empty(3 * rec_ijk.shape[0], np.int64)
    n = 0
    for r in range(rec_ijk.shape[0]):
        byte = rec_occ[r]
        o0 = byte & 1
        for a in range(3):
            if ((byte >> (1 << a)) & 1) != o0:
                out[n] = ((a * R1 + rec_ijk[r, 0]) * R1 + rec_ijk[r, 1]) * R1 + rec_ijk[r, 2]
                n += 1
    return out[:n]


@njit(cache=True)
def _assemble(edge_keys, rec_morton, rec_occ, vptr, positions, tri_bits, compute_bits, R, out_tris):
    """Quads -> triangles in canonical edge order; returns an error code (0 = ok)."""
    R1 = R + 1
    ccw = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])
    quad = np.empty(4, np.int64)
    for n in range(edge_keys.shape[0]):
        key = edge_keys[n]
        a = key // (R1 * R1 * R1)
        p0, p1, p2 = (key // (R1 * R1)) % R1, (key // R1) % R1, key % R1
        b = (a + 1) % 3
        c = (a + 2) % 3
        owner = -1
        occ_lo = -1
        for s in range(4):
            db = ccw[s, 0]
            dc = ccw[s, 1]
            ci, cj, ck = _shift(p0, p1, p2, b, -db)
            ci, cj, ck = _shift(ci, cj, ck, c, -dc)
            if ci < 0 or cj < 0 or ck < 0 or ci >= R or cj >= R or ck >= R:
                return 1
            m = morton3(ci, cj, ck)
            r = np.searchsorted(rec_morton, m)
            if r >= rec_morton.shape[0] or rec_morton[r] != m:
                return 1
            le = 4 * a + db + 2 * dc
            byte = rec_occ[r]
            comp = EDGE_COMPONENT[byte, le]
            if comp < 0:
                return 2
            lo_bit = (byte >> EDGE_CORNERS[le, 0]) & 1
            if occ_lo < 0:
                occ_lo = lo_bit
            elif occ_lo != lo_bit:
                return 2
            if s == 0:
                owner = r
            quad[s] = vptr[r] + comp
        if compute_bits:
            d02 = 0.0
            d13 = 0.0
            for x in range(3):
                d02 += (positions[quad[0], x] - positions[quad[2], x]) ** 2
                d13 += (positions[quad[1], x] - positions[quad[3], x]) ** 2
            if d02 < d13:
                bit = 0
            elif d13 < d02:
                bit = 1
            else:
                mn = min(quad[0], quad[1], quad[2], quad[3])
                bit = 0 if (quad[0] == mn or quad[2] == mn) else 1
            if bit:
                tri_bits[owner] |= np.uint8(1 << a)
            else:
                tri_bits[owner] &= np.uint8(~(1 << a) & 0xFF)
        else:
            bit = (tri_bits[owner] >> a) & 1
        if bit == 0:
            t0 = (quad[0], quad[1], quad[2])
            t1 = (quad[0], quad[2], quad[3])
        else:
            t0 = (quad[1], quad[2], quad[3])
            t1 = (quad[1], quad[3], quad[0])
        if occ_lo:
            out_tris[2 * n, 0], out_tris[2 * n, 1], out_tris[2 * n, 2] = t0
            out_tris[2 * n + 1, 0], out_tris[2 * n + 1, 1], out_tris[2 * n + 1, 2] = t1
        else:
            out_tris[2 * n, 0], out_tris[2 * n, 1], out_tris[2 * n, 2] = t0[2], t0[1], t0[0]
            out_tris[2 * n + 1, 0], out_tris[2 * n + 1, 1], out_tris[2 * n + 1, 2] = t1[2], t1[1], t1[0]
    return 0


def vertex_positions(coords, vertex_ptr, offsets, R: int) -> np.ndarray:
    """World (normalized) positions of all dual vertices."""
    counts = np.diff(vertex_ptr)
    cell = np.repeat(np.asarray(coords, dtype=np.float64), counts, axis=0)
    return (cell + offsets) * (2.0 / R) - 1.0


def assemble(coords, occupancy, vertex_ptr, offsets, tri_bits, R: int, compute_bits: bool = False,
             transform: NormalizationTransform | None = None):
    """Rebuild triangles from records. Returns (TriangleMesh, tri_bits)."""
    coords = np.ascontiguousarray(coords, dtype=np.int64).reshape(-1, 3)
    occupancy = np.ascontiguousarray(occupancy, dtype=np.uint8)
    vertex_ptr = np.ascontiguousarray(vertex_ptr, dtype=np.int64)
    tri_bits = np.array(tri_bits, dtype=np.uint8, copy=True)
    morton = morton_codes(coords)
    if len(morton) > 1 and np.any(morton[1:] <= morton[:-1]):
        raise InconsistentRecords("records are not in strictly increasing Morton order")
    positions = vertex_positions(coords, vertex_ptr, offsets, R)
    edges = np.sort(_owned_edges(coords, occupancy, R))
    tris = np.empty((2 * len(edges), 3), np.int64)
    err = _assemble(edges, morton, occupancy, vertex_ptr, positions, tri_bits, compute_bits, R, tris)
    if err == 1:
        raise InconsistentRecords("a crossing edge is missing one of its four neighbouring records")
    if err == 2:
        raise InconsistentRecords("neighbouring records disagree on a shared corner")
    prov = Provenance(None, transform)
    return TriangleMesh(positions, tris, prov), tri_bits


def check_shared_corners(coords, occupancy) -> None:
    """Raise InconsistentRecords if two records disagree about a corner they share."""
    coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
    if len(coords) == 0:
        return
    occ = np.asarray(occupancy, dtype=np.int64)
    offs = np.array([[c & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)])
    corners = (coords[:, None, :] + offs[None, :, :]).reshape(-1, 3)
    bits = ((occ[:, None] >> np.arange(8)[None, :]) & 1).reshape(-1)
    span = int(corners.max()) + 1
    keys = (corners[:, 0] * span + corners[:, 1]) * span + corners[:, 2]
    order = np.lexsort((bits, keys))
    k, b = keys[order], bits[order]
    if np.any((k[1:] == k[:-1]) & (b[1:] != b[:-1])):
        raise InconsistentRecords("neighbouring records disagree on a shared corner")


# ------------------------------------------------------------ driver

@njit(cache=True)
def _cells_of_edges(edge_keys, R):
    """Keys (i R + j) R + k of the four cells around each crossing edge."""
    R1 = R + 1
    out = np.empty(4 * edge_keys.shape[0], np.int64)
    for n in range(edge_keys.shape[0]):
        key = edge_keys[n]
        a = key // (R1 * R1 * R1)
        p0 = (key // (R1 * R1)) % R1
        p1 = (key // R1) % R1
        p2 = key % R1
        b = (a + 1) % 3
        c = (a + 2) % 3
        for s in range(4):
            i, j, k = _shift(p0, p1, p2, b, -(s & 1))
            i, j, k = _shift(i, j, k, c, -(s >> 1))
            out[4 * n + s] = (i * R + j) * R + k
    return out


@njit(cache=True)
def _cell_bytes(cells, R, nb, block_slot, st, labels, label_ext):
    out = np.empty(cells.shape[0], np.uint8)
    for n in range(cells.shape[0]):
        b = 0
        for c in range(8):
            if _occ(cells[n, 0] + (c & 1), cells[n, 1] + ((c >> 1) & 1), cells[n, 2] + ((c >> 2) & 1),
                    R, nb, block_slot, st, labels, label_ext):
                b |= 1 << c
        out[n] = b
    return out


@njit(cache=True)
def _edge_lower_occ(edge_keys, R, nb, block_slot, st, labels, label_ext):
    R1 = R + 1
    out = np.empty(edge_keys.shape[0], np.uint8)
    for n in range(edge_keys.shape[0]):
        key = edge_keys[n]
        out[n] = _occ((key // (R1 * R1)) % R1, (key // R1) % R1, key % R1, R, nb, block_slot, st,
                      labels, label_ext)
    return out


def extract(grid: SparseCornerGrid, field: LinfField | None = None, config: ExtractConfig | None = None,
            transform: NormalizationTransform | None = None) -> DMCMesh:
    """Dual marching cubes over ``grid``; ``field`` drives crossings and placement (midpoints without it)."""
    import time

    config = ExtractConfig() if config is None else config
    R = grid.resolution
    h = grid.h
    t_start = time.perf_counter()
    st = grid.state.copy()
    flips = 0
    if config.repair:
        while True:
            f = _repair_pass(R, grid.nb, grid.block_slot, grid.slot_block, st, grid.labels, grid.label_ext)
            flips += f
            if f == 0:
                break
    edges = find_crossing_edges(grid, st)
    axis, lower = edge_keys_decode(edges, R)
    occ_lo = _edge_lower_occ(edges, R, grid.nb, grid.block_slot, st, grid.labels, grid.label_ext)

    ckeys = np.unique(_cells_of_edges(edges, R))
    cells = np.stack([ckeys // (R * R), (ckeys // R) % R, ckeys % R], axis=1)
    morton = morton_codes(cells)
    order = np.argsort(morton, kind="stable")
    cells = np.ascontiguousarray(cells[order])
    rec_occ = _cell_bytes(cells, R, grid.nb, grid.block_slot, st, grid.labels, grid.label_ext)
    vptr = np.zeros(len(cells) + 1, np.int64)
    np.cumsum(N_COMPONENTS[rec_occ], out=vptr[1:])

    has_field = field is not None
    fa = field.arrays if has_field else _dummy_field_arrays()
    mode = field.mode.value if has_field else 0
    eps = field.epsilon if has_field else 0.0
    cross_p = np.empty((len(edges), 3))
    cross_n = np.empty((len(edges), 3))
    axis_c = np.ascontiguousarray(axis)
    lower_c = np.ascontiguousarray(lower)
    run_chunked(lambda lo, hi: _crossings(axis_c, lower_c, occ_lo, h, fa, mode, eps, config.iters,
                                          has_field, cross_p, cross_n, lo, hi), len(edges))
    placement = 0 if (config.placement == "qef" and has_field) else 1
    offsets = np.empty((int(vptr[-1]), 3))
    run_chunked(lambda lo, hi: _place(cells, rec_occ, vptr, edges, cross_p, cross_n, R, h, placement,
                                      config.refine and has_field, fa, mode, eps, config.iters,
                                      offsets, lo, hi), len(cells))
    bits = np.zeros(len(cells), np.uint8)
    mesh, bits = assemble(cells, rec_occ, vptr, offsets, bits, R, compute_bits=True, transform=transform)
    stats = {"crossing_edges": len(edges), "records": len(cells), "repair_flips": flips,
             "extract_time": time.perf_counter() - t_start}
    return DMCMesh(R, cells, rec_occ, vptr, offsets, bits, mesh,
                   transform if transform is not None else NormalizationTransform(), stats)


_DUMMY = None


def _dummy_field_arrays():
    """Field argument pack for occupancy-only extraction (never queried)."""
    global _DUMMY
    if _DUMMY is None:
        from .shapes import tetrahedron
        _DUMMY = LinfField(tetrahedron(), 1.0).arrays
    return _DUMMY
