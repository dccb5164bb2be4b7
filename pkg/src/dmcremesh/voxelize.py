"""Sparse conservative voxelization and flood-fill corner classification.

Corners are stored in 4x4x4 blocks. A block is materialized when it owns a
corner within one grid step of a band corner; every other block is "pure"
(only non-band corners) and is handled as a single node of a coarse
connected-component labeling, so the far exterior and the deep interior are
never expanded corner by corner.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage

from .errors import LeakDetected, ResolutionOutOfRange
from .field import STACK_SIZE, LinfField, field_kernel
from .mesh import TriangleMesh, check_watertight_manifold
from .parallel import run_chunked

EXTERIOR = 0
INTERIOR = 1
BAND = 2
CLASS_NAMES = {EXTERIOR: "EXTERIOR", INTERIOR: "INTERIOR", BAND: "BAND"}
OCC_BIT = 4
CLASS_MASK = 3

BLOCK = 4
BLOCK_SHIFT = 2
BLOCK_CORNERS = BLOCK**3
SLAB = 64  # voxelization chunk along k; keeps bitset words disjoint between chunks

MIN_RESOLUTION = 32
MAX_RESOLUTION = 1024


def check_resolution(R: int) -> int:
    R = int(R)
    if R < MIN_RESOLUTION or R > MAX_RESOLUTION or R & (R - 1):
        raise ResolutionOutOfRange(f"resolution must be a power of two in [{MIN_RESOLUTION}, "
                                   f"{MAX_RESOLUTION}], got {R}")
    return R


def grid_spacing(R: int) -> float:
    return 2.0 / R


# ------------------------------------------------------------ voxelization

@njit(cache=True, nogil=True, inline="always")
def _axis_test(ax, ay, az, v0, v1, v2, hs):
    p0 = ax * v0[0] + ay * v0[1] + az * v0[2]
    p1 = ax * v1[0] + ay * v1[1] + az * v1[2]
    p2 = ax * v2[0] + ay * v2[1] + az * v2[2]
    r = hs * (abs(ax) + abs(ay) + abs(az))
    return min(p0, p1, p2) > r or max(p0, p1, p2) < -r


@njit(cache=True, nogil=True)
def tri_box_overlap(center, hs, tri):
    """Separating-axis test between a cube (center, half size) and a triangle; touching counts.

    The half size is padded by 1e-12 so exact contact survives rounding (the test stays conservative).
    """
    hs = hs + 1e-12
    v0 = tri[0] - center
    v1 = tri[1] - center
    v2 = tri[2] - center
    for a in range(3):
        if min(v0[a], v1[a], v2[a]) > hs or max(v0[a], v1[a], v2[a]) < -hs:
            return False
    e0 = v1 - v0
    e1 = v2 - v1
    e2 = v0 - v2
    for e in (e0, e1, e2):
        # cross products of the edge with the three unit axes
        if _axis_test(0.0, -e[2], e[1], v0, v1, v2, hs):
            return False
        if _axis_test(e[2], 0.0, -e[0], v0, v1, v2, hs):
            return False
        if _axis_test(-e[1], e[0], 0.0, v0, v1, v2, hs):
            return False
    nx = e0[1] * e1[2] - e0[2] * e1[1]
    ny = e0[2] * e1[0] - e0[0] * e1[2]
    nz = e0[0] * e1[1] - e0[1] * e1[0]
    d = nx * v0[0] + ny * v0[1] + nz * v0[2]
    r = hs * (abs(nx) + abs(ny) + abs(nz))
    return not (d > r or d < -r)


@njit(cache=True, nogil=True)
def _voxelize_slab(tri_v, R, eps, bits, k_lo, k_hi):
    h = 2.0 / R
    hs = 0.5 * h + eps
    center = np.empty(3)
    c3 = np.empty(3, np.int64)
    lo_c = np.empty(3, np.int64)
    hi_c = np.empty(3, np.int64)
    for t in range(tri_v.shape[0]):
        tri = tri_v[t]
        for a in range(3):
            mn = min(tri[0, a], tri[1, a], tri[2, a])
            mx = max(tri[0, a], tri[1, a], tri[2, a])
            # a cell [c h - 1, (c+1) h - 1] dilated by eps overlaps [mn, mx]
            lo_c[a] = max(int(np.ceil((mn - eps + 1.0) / h)) - 1, 0)
            hi_c[a] = min(int(np.floor((mx + eps + 1.0) / h)), R - 1)
        lo_c[2] = max(lo_c[2], k_lo)
        hi_c[2] = min(hi_c[2], k_hi - 1)
        if lo_c[0] > hi_c[0] or lo_c[1] > hi_c[1] or lo_c[2] > hi_c[2]:
            continue
        e0 = tri[1] - tri[0]
        e1 = tri[2] - tri[0]
        n = np.array([e0[1] * e1[2] - e0[2] * e1[1],
                      e0[2] * e1[0] - e0[0] * e1[2],
                      e0[0] * e1[1] - e0[1] * e1[0]])
        an = np.abs(n)
        dom = 0
        if an[1] > an[dom]:
            dom = 1
        if an[2] > an[dom]:
            dom = 2
        nn = np.sqrt(n[0] ** 2 + n[1] ** 2 + n[2] ** 2)
        flat = nn > 0.0
        u = (dom + 1) % 3
        v = (dom + 2) % 3
        dpl = n[0] * tri[0, 0] + n[1] * tri[0, 1] + n[2] * tri[0, 2]
        for cu in range(lo_c[u], hi_c[u] + 1):
            for cv in range(lo_c[v], hi_c[v] + 1):
                a0 = lo_c[dom]
                a1 = hi_c[dom]
                if flat:
                    # the plane's extent along the dominant axis over the dilated column
                    u0 = cu * h - 1.0 - eps
                    u1 = u0 + h + 2.0 * eps
                    v0 = cv * h - 1.0 - eps
                    v1 = v0 + h + 2.0 * eps
                    zmin = np.inf
                    zmax = -np.inf
                    for uu in (u0, u1):
                        for vv in (v0, v1):
                            z = (dpl - n[u] * uu - n[v] * vv) / n[dom]
                            zmin = min(zmin, z)
                            zmax = max(zmax, z)
                    pad = 1e-9
                    a0 = max(a0, int(np.ceil((zmin - pad - eps + 1.0) / h)) - 1)
                    a1 = min(a1, int(np.floor((zmax + pad + eps + 1.0) / h)))
                for ca in range(a0, a1 + 1):
                    c3[dom] = ca
                    c3[u] = cu
                    c3[v] = cv
                    for a in range(3):
                        center[a] = (c3[a] + 0.5) * h - 1.0
                    if tri_box_overlap(center, hs, tri):
                        key = (c3[0] * R + c3[1]) * R + c3[2]
                        bits[key >> 6] |= np.uint64(1) << np.uint64(key & 63)


@njit(cache=True)
def _bits_to_keys(bits):
    n = 0
    for w in bits:
        x = w
        while x:
            x &= x - np.uint64(1)
            n += 1
    out = np.empty(n, np.int64)
    m = 0
    for i in range(bits.shape[0]):
        x = bits[i]
        b = 0
        while x:
            if x & np.uint64(1):
                out[m] = i * 64 + b
                m += 1
            x >>= np.uint64(1)
            b += 1
    return out


def voxelize_active_cells(mesh: TriangleMesh, R: int, epsilon: float) -> np.ndarray:
    """Sorted keys ``(i R + j) R + k`` of cells whose eps-dilated box overlaps a triangle."""
    R = check_resolution(R)
    tri_v = np.ascontiguousarray(mesh.corners(), dtype=np.float64)
    bits = np.zeros((R**3 + 63) // 64, dtype=np.uint64)
    run_chunked(lambda lo, hi: _voxelize_slab(tri_v, R, float(epsilon), bits, lo, hi), R, chunk=SLAB)
    return _bits_to_keys(bits)


def cell_keys_to_ijk(keys, R: int) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    return np.stack([keys // (R * R), (keys // R) % R, keys % R], axis=1)


# ------------------------------------------------------------ corner storage

@njit(cache=True, nogil=True, inline="always")
def corner_index(i, j, k, nb, block_slot):
    """Materialized corner index, or -1 - label-slot sentinel when the owning block is pure."""
    blk = ((i >> BLOCK_SHIFT) * nb + (j >> BLOCK_SHIFT)) * nb + (k >> BLOCK_SHIFT)
    s = block_slot[blk]
    if s < 0:
        return -1 - blk
    return s * BLOCK_CORNERS + (((i & 3) * BLOCK + (j & 3)) * BLOCK + (k & 3))


@njit(cache=True, nogil=True, inline="always")
def corner_state(i, j, k, ga):
    """State byte (class | occupied bit) of any corner; out-of-domain corners are EXTERIOR."""
    R, nb, block_slot, state, labels, label_ext = ga
    if i < 0 or j < 0 or k < 0 or i > R or j > R or k > R:
        return EXTERIOR
    c = corner_index(i, j, k, nb, block_slot)
    if c >= 0:
        return state[c]
    if label_ext[labels[-1 - c]]:
        return EXTERIOR
    return INTERIOR | OCC_BIT


@njit(cache=True)
def _mark_blocks(cells, R, nb, mixed):
    for n in range(cells.shape[0]):
        key = cells[n]
        c0 = key // (R * R)
        c1 = (key // R) % R
        c2 = key % R
        # corners within one step of this cell's corners: c-1 .. c+2
        for bi in range(max(c0 - 1, 0) >> BLOCK_SHIFT, (min(c0 + 2, R) >> BLOCK_SHIFT) + 1):
            for bj in range(max(c1 - 1, 0) >> BLOCK_SHIFT, (min(c1 + 2, R) >> BLOCK_SHIFT) + 1):
                for bk in range(max(c2 - 1, 0) >> BLOCK_SHIFT, (min(c2 + 2, R) >> BLOCK_SHIFT) + 1):
                    mixed[(bi * nb + bj) * nb + bk] = 1


@njit(cache=True)
def _init_state(R, nb, block_slot, slot_block, state):
    # corners beyond the domain in the last block row stay EXTERIOR and are never visited
    for s in range(slot_block.shape[0]):
        blk = slot_block[s]
        bi = blk // (nb * nb)
        bj = (blk // nb) % nb
        bk = blk % nb
        for li in range(BLOCK):
            for lj in range(BLOCK):
                for lk in range(BLOCK):
                    i = bi * BLOCK + li
                    j = bj * BLOCK + lj
                    k = bk * BLOCK + lk
                    c = s * BLOCK_CORNERS + (li * BLOCK + lj) * BLOCK + lk
                    if i <= R and j <= R and k <= R:
                        state[c] = INTERIOR
                    else:
                        state[c] = EXTERIOR


@njit(cache=True)
def _mark_band(cells, R, nb, block_slot, state):
    for n in range(cells.shape[0]):
        key = cells[n]
        c0 = key // (R * R)
        c1 = (key // R) % R
        c2 = key % R
        for d in range(8):
            c = corner_index(c0 + (d & 1), c1 + ((d >> 1) & 1), c2 + ((d >> 2) & 1), nb, block_slot)
            state[c] = BAND


@njit(cache=True)
def _collect_band(state, slot_block, nb, band_index):
    n = 0
    for c in range(state.shape[0]):
        if state[c] == BAND:
            band_index[c] = n
            n += 1
        else:
            band_index[c] = -1
    out = np.empty((n, 3), np.int64)
    m = 0
    for c in range(state.shape[0]):
        if state[c] == BAND:
            s = c // BLOCK_CORNERS
            loc = c % BLOCK_CORNERS
            blk = slot_block[s]
            out[m, 0] = (blk // (nb * nb)) * BLOCK + loc // (BLOCK * BLOCK)
            out[m, 1] = ((blk // nb) % nb) * BLOCK + (loc // BLOCK) % BLOCK
            out[m, 2] = (blk % nb) * BLOCK + loc % BLOCK
            m += 1
    return out


@njit(cache=True, nogil=True)
def _band_margins(ijk, h, eps, fa, mode, out, lo, hi):
    stack = np.empty(STACK_SIZE, np.int64)
    hint = -1
    for n in range(lo, hi):
        d, gx, gy, gz, t = field_kernel(ijk[n, 0] * h - 1.0, ijk[n, 1] * h - 1.0, ijk[n, 2] * h - 1.0,
                                        fa, mode, hint, stack)
        hint = t
        out[n] = eps - d


@njit(cache=True, inline="always")
def _on_boundary(i, j, k, R):
    return i == 0 or j == 0 or k == 0 or i == R or j == R or k == R


@njit(cache=True)
def _pure_adjacency(state, slot_block, nb, R, block_slot, labels):
    """(label, corner) pairs linking passable materialized corners to neighbouring pure blocks."""
    cap = 1024
    lab = np.empty(cap, np.int64)
    cor = np.empty(cap, np.int64)
    n = 0
    for c in range(state.shape[0]):
        if state[c] != INTERIOR:
            continue
        s = c // BLOCK_CORNERS
        loc = c % BLOCK_CORNERS
        li = loc // (BLOCK * BLOCK)
        lj = (loc // BLOCK) % BLOCK
        lk = loc % BLOCK
        if 0 < li < BLOCK - 1 and 0 < lj < BLOCK - 1 and 0 < lk < BLOCK - 1:
            continue
        blk = slot_block[s]
        i = (blk // (nb * nb)) * BLOCK + li
        j = ((blk // nb) % nb) * BLOCK + lj
        k = (blk % nb) * BLOCK + lk
        for d in range(6):
            a = d >> 1
            sg = 1 if d & 1 else -1
            ni = i + sg if a == 0 else i
            nj = j + sg if a == 1 else j
            nk = k + sg if a == 2 else k
            if ni < 0 or nj < 0 or nk < 0 or ni > R or nj > R or nk > R:
                continue
            q = corner_index(ni, nj, nk, nb, block_slot)
            if q >= 0:
                continue
            if n == cap:
                cap *= 2
                lab2 = np.empty(cap, np.int64)
                cor2 = np.empty(cap, np.int64)
                lab2[:n] = lab[:n]
                cor2[:n] = cor[:n]
                lab, cor = lab2, cor2
            lab[n] = labels[-1 - q]
            cor[n] = c
            n += 1
    return lab[:n], cor[:n]


@njit(cache=True)
def _flood(state, slot_block, nb, R, block_slot, labels, label_ext, adj_ptr, adj_cor, boundary_labels):
    """Breadth-first fill over passable corners (state INTERIOR before the fill) from the boundary."""
    queue = np.empty(state.shape[0], np.int64)
    head = 0
    tail = 0
    for lab in boundary_labels:
        if not label_ext[lab]:
            label_ext[lab] = 1
            for q in range(adj_ptr[lab], adj_ptr[lab + 1]):
                c = adj_cor[q]
                if state[c] == INTERIOR:
                    state[c] = EXTERIOR
                    queue[tail] = c
                    tail += 1
    for c in range(state.shape[0]):
        if state[c] != INTERIOR:
            continue
        s = c // BLOCK_CORNERS
        loc = c % BLOCK_CORNERS
        blk = slot_block[s]
        i = (blk // (nb * nb)) * BLOCK + loc // (BLOCK * BLOCK)
        j = ((blk // nb) % nb) * BLOCK + (loc // BLOCK) % BLOCK
        k = (blk % nb) * BLOCK + loc % BLOCK
        if _on_boundary(i, j, k, R):
            state[c] = EXTERIOR
            queue[tail] = c
            tail += 1
    while head < tail:
        c = queue[head]
        head += 1
        s = c // BLOCK_CORNERS
        loc = c % BLOCK_CORNERS
        blk = slot_block[s]
        i = (blk // (nb * nb)) * BLOCK + loc // (BLOCK * BLOCK)
        j = ((blk // nb) % nb) * BLOCK + (loc // BLOCK) % BLOCK
        k = (blk % nb) * BLOCK + loc % BLOCK
        for d in range(6):
            a = d >> 1
            sg = 1 if d & 1 else -1
            ni = i + sg if a == 0 else i
            nj = j + sg if a == 1 else j
            nk = k + sg if a == 2 else k
            if ni < 0 or nj < 0 or nk < 0 or ni > R or nj > R or nk > R:
                continue
            q = corner_index(ni, nj, nk, nb, block_slot)
            if q >= 0:
                if state[q] == INTERIOR:
                    state[q] = EXTERIOR
                    queue[tail] = q
                    tail += 1
            else:
                lab = labels[-1 - q]
                if not label_ext[lab]:
                    label_ext[lab] = 1
                    for p in range(adj_ptr[lab], adj_ptr[lab + 1]):
                        r = adj_cor[p]
                        if state[r] == INTERIOR:
                            state[r] = EXTERIOR
                            queue[tail] = r
                            tail += 1
    return tail


@njit(cache=True)
def _finalize(state, band_index, margins):
    """Apply occupancy: unreached passable corners become occupied INTERIOR."""
    for c in range(state.shape[0]):
        st = state[c]
        if st == INTERIOR:
            state[c] = INTERIOR | OCC_BIT
        elif st == BAND:
            state[c] = BAND | OCC_BIT
        elif st == EXTERIOR:
            b = band_index[c]
            if b >= 0:
                if margins[b] < 0.0:
                    state[c] = BAND  # reached by the fill: stays band, unoccupied
                else:
                    state[c] = EXTERIOR  # boundary corner forced outside


# ------------------------------------------------------------ grid

@dataclass
class GridStats:
    active_cells: int = 0
    band_corners: int = 0
    materialized_corners: int = 0
    forced_boundary: int = 0
    interior_band: int = 0
    timings: dict = field(default_factory=dict)


class SparseCornerGrid:
    """Tri-state corner classification plus occupancy on a (R+1)^3 corner lattice."""

    def __init__(self, R, epsilon, nb, block_slot, slot_block, state, band_index, band_ijk,
                 margins, labels, label_ext, active_cells, stats):
        self.resolution = R
        self.h = grid_spacing(R)
        self.epsilon = epsilon
        self.nb = nb
        self.block_slot = block_slot
        self.slot_block = slot_block
        self.state = state
        self.band_index = band_index
        self.band_ijk = band_ijk
        self.margins = margins
        self.labels = labels
        self.label_ext = label_ext
        self.active_cells = active_cells
        self.stats = stats
        for a in (state, band_index, margins, labels, label_ext, block_slot):
            a.setflags(write=False)

    @property
    def arrays(self):
        return (self.resolution, self.nb, self.block_slot, self.state, self.labels, self.label_ext)

    def corner_position(self, ijk) -> np.ndarray:
        return np.asarray(ijk, dtype=np.float64) * self.h - 1.0

    def state_of(self, ijk) -> np.ndarray:
        ijk = np.atleast_2d(np.asarray(ijk, dtype=np.int64))
        return _states(ijk, self.arrays)

    def classify(self, i, j, k) -> str:
        return CLASS_NAMES[int(self.state_of((i, j, k))[0]) & CLASS_MASK]

    def occupied(self, ijk) -> np.ndarray:
        return (self.state_of(ijk) & OCC_BIT) != 0

    def is_occupied(self, i, j, k) -> bool:
        return bool(self.occupied((i, j, k))[0])

    def margin(self, i, j, k) -> float | None:
        c = _index(i, j, k, self.arrays)
        if c < 0 or self.state[c] & CLASS_MASK != BAND:
            return None
        return float(self.margins[self.band_index[c]])

    def materialized(self):
        """(ijk, state) of every materialized in-domain corner, in storage order."""
        return _materialized(self.state, self.slot_block, self.nb, self.resolution)

    def corner_items(self):
        """Yield ``(i, j, k), class name, occupied, margin`` for every band or materialized corner."""
        ijk, st = self.materialized()
        for (i, j, k), s in zip(ijk.tolist(), st.tolist()):
            cls = s & CLASS_MASK
            yield (i, j, k), CLASS_NAMES[cls], bool(s & OCC_BIT), self.margin(i, j, k) if cls == BAND else None

    def dump(self, path) -> None:
        """Sparse text dump, one ``i j k class g`` line per materialized corner."""
        ijk, st = self.materialized()
        with open(path, "w") as fh:
            for (i, j, k), s in zip(ijk.tolist(), st.tolist()):
                cls = s & CLASS_MASK
                g = self.margin(i, j, k) if cls == BAND else None
                fh.write(f"{i} {j} {k} {CLASS_NAMES[cls]} {'nan' if g is None else repr(g)}\n")

    def dense_occupancy(self) -> np.ndarray:
        """Full (R+1)^3 boolean occupancy; only sensible for small R."""
        R = self.resolution
        idx = np.stack(np.meshgrid(*(np.arange(R + 1),) * 3, indexing="ij"), -1).reshape(-1, 3)
        return self.occupied(idx).reshape(R + 1, R + 1, R + 1)

    @classmethod
    def from_occupancy(cls, R: int, occupied_ijk, epsilon: float | None = None) -> "SparseCornerGrid":
        """Grid whose occupied set is exactly ``occupied_ijk`` (synthetic margins of +-h/2)."""
        R = check_resolution(R)
        h = grid_spacing(R)
        occ = np.atleast_2d(np.asarray(occupied_ijk, dtype=np.int64)).reshape(-1, 3)
        if occ.size and (occ.min() < 1 or occ.max() > R - 1):
            raise ValueError("occupied corners must lie strictly inside the domain")
        cells = []
        for d in range(8):
            off = np.array([d & 1, (d >> 1) & 1, (d >> 2) & 1])
            cells.append(occ - off)
        cells = np.concatenate(cells) if occ.size else np.zeros((0, 3), np.int64)
        keys = np.unique((cells[:, 0] * R + cells[:, 1]) * R + cells[:, 2])
        occ_keys = set(((occ[:, 0] * (R + 1) + occ[:, 1]) * (R + 1) + occ[:, 2]).tolist())

        def margins_fn(ijk):
            k = (ijk[:, 0] * (R + 1) + ijk[:, 1]) * (R + 1) + ijk[:, 2]
            return np.where(np.isin(k, list(occ_keys)), 0.5 * h, -0.5 * h)

        return _build_grid(R, h if epsilon is None else epsilon, keys, margins_fn)


@njit(cache=True)
def _states(ijk, ga):
    out = np.empty(ijk.shape[0], np.uint8)
    for n in range(ijk.shape[0]):
        out[n] = corner_state(ijk[n, 0], ijk[n, 1], ijk[n, 2], ga)
    return out


@njit(cache=True)
def _index(i, j, k, ga):
    R, nb, block_slot, state, labels, label_ext = ga
    if i < 0 or j < 0 or k < 0 or i > R or j > R or k > R:
        return -1
    c = corner_index(i, j, k, nb, block_slot)
    return c if c >= 0 else -1


@njit(cache=True)
def _materialized(state, slot_block, nb, R):
    n = 0
    ijk = np.empty((state.shape[0], 3), np.int64)
    st = np.empty(state.shape[0], np.uint8)
    for c in range(state.shape[0]):
        s = c // BLOCK_CORNERS
        loc = c % BLOCK_CORNERS
        blk = slot_block[s]
        i = (blk // (nb * nb)) * BLOCK + loc // (BLOCK * BLOCK)
        j = ((blk // nb) % nb) * BLOCK + (loc // BLOCK) % BLOCK
        k = (blk % nb) * BLOCK + loc % BLOCK
        if i > R or j > R or k > R:
            continue
        ijk[n, 0] = i
        ijk[n, 1] = j
        ijk[n, 2] = k
        st[n] = state[c]
        n += 1
    return ijk[:n], st[:n]


def _build_grid(R, epsilon, active_cells, margins_fn, timings=None) -> SparseCornerGrid:
    """Shared construction: band marking, margins, then the flood fill."""
    import time

    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    nb = (R >> BLOCK_SHIFT) + 1
    mixed = np.zeros(nb**3, np.uint8)
    _mark_blocks(active_cells, R, nb, mixed)
    slot_block = np.flatnonzero(mixed).astype(np.int64)
    block_slot = np.full(nb**3, -1, np.int32)
    block_slot[slot_block] = np.arange(len(slot_block), dtype=np.int32)
    state = np.empty(len(slot_block) * BLOCK_CORNERS, np.uint8)
    _init_state(R, nb, block_slot, slot_block, state)
    _mark_band(active_cells, R, nb, block_slot, state)
    band_index = np.empty(len(state), np.int32)
    band_ijk = _collect_band(state, slot_block, nb, band_index)
    timings["band"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    margins = np.asarray(margins_fn(band_ijk), dtype=np.float64)
    timings["sdf"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    on_boundary = np.any((band_ijk == 0) | (band_ijk == R), axis=1)
    passable_band = (margins < 0) | on_boundary
    forced = int(np.sum(on_boundary & (margins >= 0)))
    # passable band corners take part in the fill like non-band ones
    band_c = np.flatnonzero(band_index >= 0)
    state[band_c[passable_band[band_index[band_c]]]] = INTERIOR

    pure = (mixed == 0).reshape(nb, nb, nb)
    labels, n_labels = ndimage.label(pure)
    labels = labels.reshape(-1).astype(np.int32)
    label_ext = np.zeros(n_labels + 1, np.uint8)
    shell = np.zeros((nb, nb, nb), bool)
    shell[[0, -1], :, :] = True
    shell[:, [0, -1], :] = True
    shell[:, :, [0, -1]] = True
    boundary_labels = np.unique(labels.reshape(nb, nb, nb)[shell & pure]).astype(np.int64)

    lab, cor = _pure_adjacency(state, slot_block, nb, R, block_slot, labels)
    order = np.argsort(lab, kind="stable")
    adj_cor = cor[order]
    adj_ptr = np.searchsorted(lab[order], np.arange(n_labels + 2)).astype(np.int64)
    _flood(state, slot_block, nb, R, block_slot, labels, label_ext, adj_ptr, adj_cor, boundary_labels)
    # band corners the fill could not reach were passable only because g < 0:
    # they sit inside the solid and become INTERIOR
    _finalize(state, band_index, margins)
    interior_band = int(np.sum((state[band_c] & CLASS_MASK) == INTERIOR))
    timings["flood"] = time.perf_counter() - t0

    stats = GridStats(len(active_cells), len(band_ijk), len(state), forced, interior_band, timings)
    return SparseCornerGrid(R, epsilon, nb, block_slot, slot_block, state, band_index, band_ijk,
                            margins, labels, label_ext, active_cells, stats)


def classify_corners(mesh: TriangleMesh, field: LinfField, R: int, check_leaks: bool = False,
                     timings: dict | None = None) -> SparseCornerGrid:
    """Voxelize, evaluate margins on band corners and flood-fill the rest."""
    import time

    R = check_resolution(R)
    timings = {} if timings is None else timings
    h = grid_spacing(R)
    eps = field.epsilon
    t0 = time.perf_counter()
    cells = voxelize_active_cells(mesh, R, eps)
    timings["voxelize"] = time.perf_counter() - t0
    fa = field.arrays
    mode = field.mode.value

    def margins_fn(ijk):
        out = np.empty(len(ijk))
        ijk = np.ascontiguousarray(ijk)
        run_chunked(lambda lo, hi: _band_margins(ijk, h, eps, fa, mode, out, lo, hi), len(ijk))
        return out

    grid = _build_grid(R, eps, cells, margins_fn, timings)
    if check_leaks:
        leaks = count_leaks(grid, mesh)
        if leaks:
            warnings.warn(LeakDetected(f"{leaks} exterior corners lie inside the closed input"), stacklevel=2)
    return grid


# ------------------------------------------------------------ ray parity

@njit(cache=True, nogil=True)
def _ray_parity(points, tri_v, direction, out, lo, hi):
    """Möller-Trumbore crossing count parity along ``direction`` for each point."""
    for n in range(lo, hi):
        o = points[n]
        cnt = 0
        for t in range(tri_v.shape[0]):
            v0 = tri_v[t, 0]
            e1 = tri_v[t, 1] - v0
            e2 = tri_v[t, 2] - v0
            px = direction[1] * e2[2] - direction[2] * e2[1]
            py = direction[2] * e2[0] - direction[0] * e2[2]
            pz = direction[0] * e2[1] - direction[1] * e2[0]
            det = e1[0] * px + e1[1] * py + e1[2] * pz
            if abs(det) < 1e-14:
                continue
            inv = 1.0 / det
            s = o - v0
            u = (s[0] * px + s[1] * py + s[2] * pz) * inv
            if u < 0.0 or u > 1.0:
                continue
            qx = s[1] * e1[2] - s[2] * e1[1]
            qy = s[2] * e1[0] - s[0] * e1[2]
            qz = s[0] * e1[1] - s[1] * e1[0]
            v = (direction[0] * qx + direction[1] * qy + direction[2] * qz) * inv
            if v < 0.0 or u + v > 1.0:
                continue
            tt = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
            if tt > 0.0:
                cnt += 1
        out[n] = cnt & 1


RAY_DIRECTION = np.array([0.5773502691896258, 0.5773502691896258, 0.5773502691896257]) + \
    np.array([0.0113, -0.0071, 0.0037])


def ray_parity_inside(mesh: TriangleMesh, points) -> np.ndarray:
    """Inside test by crossing parity along a fixed skew ray (for closed meshes)."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    out = np.zeros(len(pts), np.uint8)
    d = RAY_DIRECTION / np.linalg.norm(RAY_DIRECTION)
    tri_v = np.ascontiguousarray(mesh.corners())
    run_chunked(lambda lo, hi: _ray_parity(pts, tri_v, d, out, lo, hi), len(pts), chunk=256)
    return out.astype(bool)


def count_leaks(grid: SparseCornerGrid, mesh: TriangleMesh, max_samples: int = 2000) -> int:
    """EXTERIOR corners that ray parity places inside a closed input (0 for open inputs)."""
    if not check_watertight_manifold(mesh).closed:
        return 0
    ijk, st = grid.materialized()
    ext = ijk[(st & CLASS_MASK) == EXTERIOR]
    if len(ext) > max_samples:
        ext = ext[np.linspace(0, len(ext) - 1, max_samples).astype(np.int64)]
    return int(np.sum(ray_parity_inside(mesh, grid.corner_position(ext))))
