"""Triangle mesh container, normalization and topology/dihedral analysis."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateBounds, EmptyMesh, NonManifoldInput

AREA_TOL = 1e-12
WELD_TOL = 1e-9


@dataclass(frozen=True)
class NormalizationTransform:
    """Maps source coordinates to normalized ones: ``x_norm = scale * x + translation``."""

    scale: float = 1.0
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError(f"scale must be positive, got {self.scale}")

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + np.asarray(self.translation)

    def invert(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - np.asarray(self.translation)) / self.scale

    def compose(self, inner: "NormalizationTransform") -> "NormalizationTransform":
        """Transform equivalent to applying ``inner`` first, then ``self``."""
        t = self.scale * np.asarray(inner.translation) + np.asarray(self.translation)
        return NormalizationTransform(self.scale * inner.scale, tuple(float(v) for v in t))

    @classmethod
    def identity(cls) -> "NormalizationTransform":
        return cls()


@dataclass(frozen=True)
class Plane:
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("plane normal must be unit length")

    def distance(self, p) -> float:
        """Unsigned distance from ``p`` to the plane."""
        return float(abs(np.dot(self.normal, p) - self.offset))

    @classmethod
    def through_triangle(cls, a, b, c) -> "Plane":
        n = np.cross(np.subtract(b, a), np.subtract(c, a))
        length = np.linalg.norm(n)
        if length == 0:
            raise ValueError("degenerate triangle has no plane")
        n = n / length
        return cls(n, float(np.dot(n, a)))


@dataclass(frozen=True)
class Provenance:
    path: str | None = None
    transform: NormalizationTransform | None = None


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    positions: np.ndarray
    triangles: np.ndarray
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        tri = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if tri.size and (tri.min() < 0 or tri.max() >= len(pos)):
            raise ValueError("triangle index out of range")
        pos.setflags(write=False)
        tri.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "triangles", tri)

    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> np.ndarray:
        """(F, 3, 3) array of triangle corner positions."""
        return self.positions[self.triangles]

    def face_normals(self, unit: bool = True, faces=None) -> np.ndarray:
        """Per-face normals (area-scaled unless ``unit``), optionally for a subset of faces."""
        t = self.triangles if faces is None else self.triangles[faces]
        p0 = self.positions[t[:, 0]]
        n = np.cross(self.positions[t[:, 1]] - p0, self.positions[t[:, 2]] - p0)
        del p0
        if not unit:
            return n
        length = np.linalg.norm(n, axis=1, keepdims=True)
        return np.divide(n, length, out=np.zeros_like(n), where=length > 0)

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(unit=False), axis=1)

    def vertex_normals(self) -> np.ndarray:
        """Area-weighted vertex normals (only used by the metrics)."""
        fn = self.face_normals(unit=False)  # length = 2 * area
        vn = np.zeros_like(self.positions)
        for k in range(3):
            np.add.at(vn, self.triangles[:, k], fn)
        length = np.linalg.norm(vn, axis=1, keepdims=True)
        return np.divide(vn, length, out=np.zeros_like(vn), where=length > 0)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_vertices == 0:
            raise EmptyMesh("mesh has no vertices")
        used = self.positions[np.unique(self.triangles)] if self.n_triangles else self.positions
        return used.min(axis=0), used.max(axis=0)

    def transformed(self, transform: NormalizationTransform) -> "TriangleMesh":
        prev = self.provenance.transform
        combined = transform if prev is None else transform.compose(prev)
        return TriangleMesh(transform.apply(self.positions), self.triangles,
                            Provenance(self.provenance.path, combined))

    def with_triangles(self, triangles: np.ndarray) -> "TriangleMesh":
        return TriangleMesh(self.positions, triangles, self.provenance)


def weld(positions: np.ndarray, triangles: np.ndarray, tol: float = WELD_TOL):
    """Merge vertices closer than ``tol``.

    Clusters are the connected components of the "within tol" relation; each
    cluster is represented by its lowest original index. Returns the compacted
    positions, remapped triangles and the old->new index map.
    """
    positions = np.asarray(positions, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    n = len(positions)
    if n == 0:
        return positions.reshape(0, 3), triangles.reshape(0, 3), np.zeros(0, np.int64)
    if tol > 0:
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components
        from scipy.spatial import cKDTree

        pairs = cKDTree(positions).query_pairs(tol, output_type="ndarray")
        graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, label = connected_components(graph, directed=False)
    else:
        _, label = np.unique(positions, axis=0, return_inverse=True)
        label = label.reshape(-1)
    # representative = lowest index per cluster, new ids in first-occurrence order
    first = np.full(label.max() + 1, n, dtype=np.int64)
    np.minimum.at(first, label, np.arange(n))
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    remap = rank[label]
    new_pos = positions[first[order]]
    return new_pos, remap[triangles], remap


def drop_degenerate(positions: np.ndarray, triangles: np.ndarray, area_tol: float = AREA_TOL):
    """Remove triangles with repeated indices or area <= ``area_tol``."""
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if len(t) == 0:
        return t
    distinct = (t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2])
    v = positions[t]
    area = 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
    return t[distinct & (area > area_tol)]


def normalize_to_unit_cube(mesh: TriangleMesh, padding: float = 0.1):
    """Scale and center ``mesh`` so its longest AABB axis spans [-1+padding, 1-padding]."""
    if not 0 <= padding < 0.5:
        raise ValueError("padding must lie in [0, 0.5)")
    if mesh.n_triangles == 0:
        raise EmptyMesh("cannot normalize an empty mesh")
    lo, hi = mesh.bounds()
    extent = float((hi - lo).max())
    if not extent > 0:
        raise DegenerateBounds("mesh bounding box has zero extent")
    scale = 2.0 * (1.0 - padding) / extent
    translation = -scale * 0.5 * (lo + hi)
    transform = NormalizationTransform(scale, tuple(float(v) for v in translation))
    return mesh.transformed(transform), transform


class ManifoldReport(NamedTuple):
    edge_manifold: bool
    closed: bool
    oriented: bool
    euler_characteristic: int

    @property
    def watertight(self) -> bool:
        return self.edge_manifold and self.closed and self.oriented


def _welded_triangles(mesh: TriangleMesh) -> tuple[np.ndarray, int]:
    """Triangles re-indexed over exactly-coincident positions; returns (tris, n_used_vertices)."""
    if mesh.n_triangles == 0:
        return np.zeros((0, 3), np.int64), 0
    _, inv = unique_rows(mesh.positions)
    tris = inv[mesh.triangles]
    return tris, len(np.unique(tris))


def unique_rows(points: np.ndarray):
    """(sorted distinct rows, inverse index); a lexsort, lighter than ``np.unique(axis=0)``."""
    points = np.asarray(points)
    if len(points) == 0:
        return points.copy(), np.zeros(0, np.int64)
    order = np.lexsort(points.T[::-1])
    srt = points[order]
    new = np.empty(len(points), bool)
    new[0] = True
    np.any(srt[1:] != srt[:-1], axis=1, out=new[1:])
    group = np.cumsum(new) - 1
    inv = np.empty(len(points), np.int64)
    inv[order] = group
    return srt[new], inv


def _edge_table(tris: np.ndarray):
    """Directed half-edges grouped by undirected edge.

    Returns (unique undirected edges (E, 2), inverse index per half-edge,
    count per edge, and the half-edge arrays (a, b, face)).
    """
    a = tris.reshape(-1)
    b = tris[:, [1, 2, 0]].reshape(-1)
    face = np.repeat(np.arange(len(tris)), 3)
    n = np.int64(max(int(tris.max()) + 1, 1))
    keys, inv, counts = np.unique(np.minimum(a, b) * n + np.maximum(a, b), return_inverse=True,
                                  return_counts=True)
    edges = np.stack([keys // n, keys % n], axis=1)
    return edges, inv.reshape(-1), counts, a, b, face


def check_watertight_manifold(mesh: TriangleMesh) -> ManifoldReport:
    tris, n_vertices = _welded_triangles(mesh)
    if len(tris) == 0:
        return ManifoldReport(True, False, True, 0)
    edges, inv, counts, a, b, _ = _edge_table(tris)
    edge_manifold = bool(np.all(counts <= 2))
    closed = bool(np.all(counts == 2))
    # Orientation: along each 2-face edge the two half-edges must run opposite ways.
    forward = (a < b).astype(np.int64)
    fwd_count = np.bincount(inv, weights=forward, minlength=len(edges))
    two = counts == 2
    oriented = bool(np.all(fwd_count[two] == 1)) and edge_manifold
    chi = n_vertices - len(edges) + len(tris)
    return ManifoldReport(edge_manifold, closed, oriented, int(chi))


def connected_components(mesh: TriangleMesh) -> int:
    """Number of edge-connected triangle components (on the welded mesh)."""
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components as cc

    tris, _ = _welded_triangles(mesh)
    if len(tris) == 0:
        return 0
    n = int(tris.max()) + 1
    rows = np.concatenate([tris[:, 0], tris[:, 1]])
    cols = np.concatenate([tris[:, 1], tris[:, 2]])
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    used = np.unique(tris)
    _, label = cc(graph, directed=False)
    return len(np.unique(label[used]))


class InteriorEdges(NamedTuple):
    dihedral: np.ndarray  # degrees, 180 = flat
    length: np.ndarray
    faces: np.ndarray  # (E, 2) the two incident triangles
    p0: np.ndarray  # (E, 3) endpoints
    p1: np.ndarray


def interior_edges(mesh: TriangleMesh, strict: bool = False) -> InteriorEdges:
    """Geometry of every edge shared by exactly two triangles (welded by exact position).

    Edges next to a zero-area face carry no crease information and are
    reported as flat. Edges with more than two faces are skipped, or raise
    NonManifoldInput when ``strict``.
    """
    tris, _ = _welded_triangles(mesh)
    if len(tris) == 0:
        z = np.zeros((0, 3))
        return InteriorEdges(np.zeros(0), np.zeros(0), np.zeros((0, 2), np.int64), z, z)
    # one int64 key per half-edge; sorted, equal keys are the faces around an edge
    n = np.int64(int(tris.max()) + 1)
    a = tris.reshape(-1)
    b = tris[:, [1, 2, 0]].reshape(-1)
    key = np.minimum(a, b) * n
    key += np.maximum(a, b)
    del a, b, tris
    order = np.argsort(key, kind="stable")
    key = key[order]
    new = np.empty(len(key), bool)
    new[0] = True
    np.not_equal(key[1:], key[:-1], out=new[1:])
    starts = np.flatnonzero(new)
    del new
    counts = np.diff(np.append(starts, len(key)))
    if strict and np.any(counts > 2):
        raise NonManifoldInput(f"{int(np.sum(counts > 2))} edges have more than two faces")
    first = starts[counts == 2]
    del starts, counts
    edge_key = key[first]
    del key
    f0 = order[first] // 3
    f1 = order[first + 1] // 3
    del order, first
    normals = mesh.face_normals(unit=False)
    length = np.linalg.norm(normals, axis=1)
    ok = (length[f0] > 0) & (length[f1] > 0)
    normals /= np.where(length > 0, length, 1.0)[:, None]
    del length
    cosang = np.clip(np.einsum("ij,ij->i", normals[f0], normals[f1]), -1.0, 1.0)
    del normals
    dihedral = np.where(ok, 180.0 - np.degrees(np.arccos(cosang)), 180.0)
    uniq_pos, _ = unique_rows(mesh.positions)
    p0, p1 = uniq_pos[edge_key // n], uniq_pos[edge_key % n]
    return InteriorEdges(dihedral, np.linalg.norm(p1 - p0, axis=1), np.stack([f0, f1], axis=1), p0, p1)


def interior_edge_dihedrals(mesh: TriangleMesh, strict: bool = True):
    """(dihedral degrees, length, incident face pairs) of every interior edge."""
    e = interior_edges(mesh, strict)
    return e.dihedral, e.length, e.faces


def dihedral_histogram(mesh: TriangleMesh, bins: int = 36):
    """Edge-length weighted histogram of interior dihedral angles over [0, 180] degrees.

    Returns ``(weights, bin_edges)``; weights sum to the total interior edge length.
    """
    if bins <= 0:
        raise ValueError("bins must be positive")
    dihedral, length, _ = interior_edge_dihedrals(mesh)
    weights, edges = np.histogram(dihedral, bins=bins, range=(0.0, 180.0), weights=length)
    return weights, edges


def crease_fraction(mesh: TriangleMesh, target: float = 90.0, window: float = 5.0,
                    crease_max: float = 150.0) -> float:
    """Fraction of crease length (dihedral <= ``crease_max``) within ``window`` of ``target``."""
    dihedral, length, _ = interior_edge_dihedrals(mesh)
    crease = dihedral <= crease_max
    total = length[crease].sum()
    if total == 0:
        return 0.0
    near = crease & (np.abs(dihedral - target) <= window)
    return float(length[near].sum() / total)
