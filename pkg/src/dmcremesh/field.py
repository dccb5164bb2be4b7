"""Unsigned distance fields over a triangle mesh.

The L-infinity distance of a point P is the largest distance from P to the
supporting plane of any triangle incident to P's nearest surface point Q.
Near a convex corner or crease this is the distance to the farthest face
plane instead of the distance to the crease itself, so its offset surfaces
are polyhedral and keep the angles of the input.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from numba import njit

from .bvh import (STACK_SIZE, TOL_FEAT, TriangleBVH, _closest_idx, build_bvh, classify_feature,
                  incident_range, nearest_kernel)
from .mesh import Plane, TriangleMesh
from .parallel import run_chunked

LINF = 0
L2 = 1


class Mode(Enum):
    LINF = LINF
    L2 = L2

    @classmethod
    def parse(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ValueError(f"unknown distance mode {value!r}; expected linf or l2") from None


class LinfField:
    """Immutable distance query object; ``mode`` selects L-infinity or plain Euclidean distance."""

    def __init__(self, mesh_or_bvh, epsilon: float, mode="linf", tol_feat: float = TOL_FEAT):
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        bvh = mesh_or_bvh if isinstance(mesh_or_bvh, TriangleBVH) else build_bvh(mesh_or_bvh)
        self.bvh = bvh
        self.epsilon = float(epsilon)
        self.mode = Mode.parse(mode)
        self.tol_feat = float(tol_feat)
        tv = bvh.tri_v
        n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
        length = np.linalg.norm(n, axis=1, keepdims=True)
        n = np.divide(n, length, out=np.zeros_like(n), where=length > 0)
        # offset through the centroid is the most accurate choice for all three vertices
        self.plane_normals = np.ascontiguousarray(n)
        self.plane_offsets = np.einsum("ij,ij->i", n, tv.mean(axis=1))
        self.plane_ok = bvh.nondegenerate.copy()

    @property
    def mesh(self) -> TriangleMesh:
        return self.bvh.mesh

    def plane(self, i: int) -> Plane | None:
        if not self.plane_ok[i]:
            return None
        return Plane(self.plane_normals[i], float(self.plane_offsets[i]))

    @property
    def arrays(self):
        return (self.bvh.arrays, self.bvh.adjacency, self.plane_normals, self.plane_offsets,
                self.plane_ok, self.tol_feat)

    def with_mode(self, mode) -> "LinfField":
        out = object.__new__(LinfField)
        out.__dict__.update(self.__dict__)
        out.mode = Mode.parse(mode)
        return out

    def with_epsilon(self, epsilon: float) -> "LinfField":
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        out = object.__new__(LinfField)
        out.__dict__.update(self.__dict__)
        out.epsilon = float(epsilon)
        return out

    # vectorized queries
    def distance(self, points, mode=None) -> np.ndarray:
        mode = self.mode if mode is None else Mode.parse(mode)
        return evaluate(self, points, mode)[0]

    def margin(self, points) -> np.ndarray:
        return self.epsilon - self.distance(points)

    def gradient(self, points, mode=None) -> np.ndarray:
        """Unit gradient of the distance (zero where undefined)."""
        mode = self.mode if mode is None else Mode.parse(mode)
        return evaluate(self, points, mode)[1]


@njit(cache=True, nogil=True)
def field_kernel(px, py, pz, fa, mode, hint, stack):
    """(distance, gx, gy, gz, nearest tri) at one point."""
    bvh_arrays, adjacency, pn, pd, pok, tol = fa
    tri_v = bvh_arrays[0]
    t, u, v, w, d2 = nearest_kernel(px, py, pz, bvh_arrays, hint, stack)
    qx = u * tri_v[t, 0, 0] + v * tri_v[t, 1, 0] + w * tri_v[t, 2, 0]
    qy = u * tri_v[t, 0, 1] + v * tri_v[t, 1, 1] + w * tri_v[t, 2, 1]
    qz = u * tri_v[t, 0, 2] + v * tri_v[t, 1, 2] + w * tri_v[t, 2, 2]
    el = np.sqrt(d2)
    if mode == 1 or el == 0.0:
        if el > 0.0:
            return el, (px - qx) / el, (py - qy) / el, (pz - qz) / el, t
        return 0.0, 0.0, 0.0, 0.0, t
    feature, local = classify_feature(u, v, w, tol)
    src, lo, hi = incident_range(t, feature, local, adjacency)
    best = -1.0
    gx = gy = gz = 0.0
    for k in range(lo, hi):
        if src == 0:
            i = k
        elif src == 1:
            i = adjacency[3][k]
        else:
            i = adjacency[5][k]
        if not pok[i]:
            continue
        s = pn[i, 0] * px + pn[i, 1] * py + pn[i, 2] * pz - pd[i]
        a = abs(s)
        if a > best:
            best = a
            sg = 1.0 if s >= 0.0 else -1.0
            gx, gy, gz = sg * pn[i, 0], sg * pn[i, 1], sg * pn[i, 2]
    if best < 0.0:
        # only degenerate triangles touch Q: fall back to the Euclidean distance
        return el, (px - qx) / el, (py - qy) / el, (pz - qz) / el, t
    return best, gx, gy, gz, t


@njit(cache=True, nogil=True)
def occupied_kernel(px, py, pz, fa, mode, eps, hint, stack):
    """(g >= 0, nearest tri or hint) with a shortcut: both distances are bounded by the
    Euclidean distance to any triangle, so a hint triangle well inside eps settles it."""
    if hint >= 0:
        bvh_arrays = fa[0]
        u, v, w, d2 = _closest_idx(px, py, pz, bvh_arrays[0], hint, bvh_arrays[8])
        if d2 < eps * eps * (1.0 - 1e-9):
            return True, hint
    d, gx, gy, gz, t = field_kernel(px, py, pz, fa, mode, hint, stack)
    return eps - d >= 0.0, t


@njit(cache=True, nogil=True)
def _evaluate_range(points, fa, mode, out_d, out_g, lo, hi):
    stack = np.empty(STACK_SIZE, np.int64)
    hint = -1
    for i in range(lo, hi):
        d, gx, gy, gz, t = field_kernel(points[i, 0], points[i, 1], points[i, 2], fa, mode, hint, stack)
        hint = t
        out_d[i] = d
        out_g[i, 0] = gx
        out_g[i, 1] = gy
        out_g[i, 2] = gz


def evaluate(field: LinfField, points, mode: Mode | None = None):
    """Distances and unit gradients at ``points`` (N, 3)."""
    mode = field.mode if mode is None else Mode.parse(mode)
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    n = len(pts)
    out_d = np.empty(n)
    out_g = np.empty((n, 3))
    fa = field.arrays
    m = mode.value
    run_chunked(lambda lo, hi: _evaluate_range(pts, fa, m, out_d, out_g, lo, hi), n)
    return out_d, out_g


def linf_distance(field: LinfField, p) -> float:
    return float(evaluate(field, np.reshape(p, (1, 3)), Mode.LINF)[0][0])


def l2_distance(field: LinfField, p) -> float:
    return float(evaluate(field, np.reshape(p, (1, 3)), Mode.L2)[0][0])


def occupancy_margin(field: LinfField, p) -> float:
    """g(p) = epsilon - distance(p); positive inside the dilated envelope."""
    return field.epsilon - float(evaluate(field, np.reshape(p, (1, 3)))[0][0])
