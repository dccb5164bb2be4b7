"""Bit-packed serialization of DMC records (``.tpmc``).

Layout: 43-byte little-endian header (magic ``TPMC``, version, resolution,
record count, transform scale and translation as float64), a payload
bitstream written least-significant bit first, and a CRC-32 of the payload.
Each record is 3x10 bits of cell coordinates, the 8-bit corner occupancy,
3x10 bits per dual vertex (vertex count comes from the case table) and 3
triangulation bits. No connectivity is stored.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np
from numba import njit

from .errors import (BadMagic, BadVersion, ChecksumMismatch, MalformedStream, NonCanonicalOrder,
                     ResolutionTooHigh, TruncatedStream)
from .extract import DMCMesh, assemble, check_shared_corners, morton_codes
from .mesh import NormalizationTransform, TriangleMesh
from .tables import N_COMPONENTS

MAGIC = b"TPMC"
VERSION = 1
HEADER = struct.Struct("<4sBHI4d")
HEADER_SIZE = HEADER.size  # 43
TRAILER_SIZE = 4
COORD_BITS = 10
OFFSET_BITS = 10
QUANT = 1 << OFFSET_BITS
MAX_RESOLUTION = 1 << COORD_BITS


def quantize(offsets) -> np.ndarray:
    q = np.floor(np.asarray(offsets, dtype=np.float64) * QUANT)
    return np.clip(q, 0, QUANT - 1).astype(np.int64)


def dequantize(q) -> np.ndarray:
    return (np.asarray(q, dtype=np.float64) + 0.5) / QUANT


def record_bits(occupancy) -> np.ndarray:
    occ = np.asarray(occupancy, dtype=np.int64)
    return 3 * COORD_BITS + 8 + 3 * OFFSET_BITS * N_COMPONENTS[occ] + 3


@njit(cache=True, inline="always")
def _put(buf, pos, value, nbits):
    for b in range(nbits):
        if (value >> b) & 1:
            buf[(pos + b) >> 3] |= np.uint8(1 << ((pos + b) & 7))
    return pos + nbits


@njit(cache=True, inline="always")
def _get(buf, pos, nbits):
    v = 0
    for b in range(nbits):
        if (buf[(pos + b) >> 3] >> ((pos + b) & 7)) & 1:
            v |= 1 << b
    return v


@njit(cache=True)
def _pack(coords, occ, vptr, q, bits, nbytes):
    buf = np.zeros(nbytes, np.uint8)
    pos = 0
    for r in range(coords.shape[0]):
        for a in range(3):
            pos = _put(buf, pos, coords[r, a], 10)
        pos = _put(buf, pos, occ[r], 8)
        for v in range(vptr[r], vptr[r + 1]):
            for a in range(3):
                pos = _put(buf, pos, q[v, a], 10)
        pos = _put(buf, pos, bits[r], 3)
    return buf


@njit(cache=True)
def _unpack(buf, n_records, R, n_comp, coords, occ, vptr, q, bits):
    """Returns (status, bit position); status 0 ok, 1 ran out of data, 2 invalid content."""
    total = buf.shape[0] * 8
    pos = 0
    nv = 0
    prev = -1
    for r in range(n_records):
        if pos + 38 > total:
            return 1, pos
        for a in range(3):
            coords[r, a] = _get(buf, pos, 10)
            pos += 10
        o = _get(buf, pos, 8)
        pos += 8
        occ[r] = o
        if coords[r, 0] >= R or coords[r, 1] >= R or coords[r, 2] >= R or o == 0 or o == 255:
            return 2, pos
        i, j, k = coords[r, 0], coords[r, 1], coords[r, 2]
        m = 0
        for b in range(10):
            m |= ((i >> b) & 1) << (3 * b)
            m |= ((j >> b) & 1) << (3 * b + 1)
            m |= ((k >> b) & 1) << (3 * b + 2)
        if m <= prev:
            return 2, pos
        prev = m
        c = n_comp[o]
        if pos + 30 * c + 3 > total:
            return 1, pos
        if nv + c > q.shape[0]:
            return 2, pos
        for v in range(nv, nv + c):
            for a in range(3):
                q[v, a] = _get(buf, pos, 10)
                pos += 10
        nv += c
        vptr[r + 1] = nv
        bits[r] = _get(buf, pos, 3)
        pos += 3
    return 0, pos


def encode(mesh: DMCMesh) -> bytes:
    R = mesh.resolution
    if R > MAX_RESOLUTION:
        raise ResolutionTooHigh(f"resolution {R} does not fit {COORD_BITS}-bit coordinates")
    coords = np.ascontiguousarray(mesh.coords, dtype=np.int64).reshape(-1, 3)
    morton = morton_codes(coords)
    if len(morton) > 1 and np.any(morton[1:] <= morton[:-1]):
        raise NonCanonicalOrder("records must be in strictly increasing Morton order")
    occ = np.ascontiguousarray(mesh.occupancy, dtype=np.int64)
    vptr = np.ascontiguousarray(mesh.vertex_ptr, dtype=np.int64)
    if len(vptr) != len(coords) + 1 or np.any(np.diff(vptr) != N_COMPONENTS[occ]):
        raise MalformedStream("vertex counts do not match the case table")
    q = quantize(mesh.offsets).reshape(-1, 3)
    total_bits = int(record_bits(occ).sum()) if len(occ) else 0
    payload = _pack(coords, occ, vptr, q, np.ascontiguousarray(mesh.tri_bits, dtype=np.int64),
                    (total_bits + 7) // 8).tobytes()
    t = mesh.transform
    header = HEADER.pack(MAGIC, VERSION, R, len(coords), float(t.scale), *(float(v) for v in t.translation))
    return header + payload + struct.pack("<I", zlib.crc32(payload))


def decode(data: bytes) -> DMCMesh:
    """Parse a stream into records (``assembled`` is left as None; see :func:`reassemble`)."""
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic("not a TPMC stream")
    if len(data) >= 5 and data[4] != VERSION:
        raise BadVersion(f"unsupported version {data[4]}")
    if len(data) < HEADER_SIZE + TRAILER_SIZE:
        raise TruncatedStream("stream shorter than header and trailer")
    _, _, R, n, scale, tx, ty, tz = HEADER.unpack_from(data)
    payload = data[HEADER_SIZE:-TRAILER_SIZE]
    crc_ok = struct.unpack("<I", data[-TRAILER_SIZE:])[0] == zlib.crc32(payload)
    if R == 0 or R > MAX_RESOLUTION:
        raise MalformedStream(f"invalid resolution {R}")
    min_bits = 3 * COORD_BITS + 8 + 3
    if n * min_bits > len(payload) * 8:
        if crc_ok:
            raise MalformedStream("record count exceeds payload")
        raise TruncatedStream(f"{n} records cannot fit in {len(payload)} payload bytes")
    buf = np.frombuffer(payload, dtype=np.uint8)
    max_vertices = min(4 * n, len(payload) * 8 // (3 * OFFSET_BITS) + 1)
    coords = np.zeros((n, 3), np.int64)
    occ = np.zeros(n, np.int64)
    vptr = np.zeros(n + 1, np.int64)
    q = np.zeros((max_vertices, 3), np.int64)
    bits = np.zeros(n, np.int64)
    status, pos = _unpack(buf, n, R, N_COMPONENTS, coords, occ, vptr, q, bits)
    if status == 1:
        if crc_ok:
            raise MalformedStream("record count exceeds payload")
        raise TruncatedStream(f"payload ends inside record data ({len(payload)} bytes)")
    if not crc_ok:
        raise ChecksumMismatch("payload CRC-32 does not match trailer")
    if status == 2:
        raise MalformedStream("invalid record content")
    if (pos + 7) // 8 != len(payload):
        raise MalformedStream("payload has trailing bytes")
    if pos % 8 and buf[-1] >> (pos % 8):
        raise MalformedStream("non-zero padding bits")
    try:
        transform = NormalizationTransform(scale, (tx, ty, tz))
    except ValueError as exc:
        raise MalformedStream(str(exc)) from None
    offsets = dequantize(q[:vptr[-1]])
    return DMCMesh(R, coords, occ.astype(np.uint8), vptr, offsets, bits.astype(np.uint8), None,
                   transform, {})


def reassemble(records: DMCMesh, resolution: int | None = None,
               transform: NormalizationTransform | None = None) -> TriangleMesh:
    """Triangle mesh (normalized coordinates) regenerated purely from the records."""
    R = records.resolution if resolution is None else resolution
    transform = records.transform if transform is None else transform
    check_shared_corners(records.coords, records.occupancy)
    mesh, _ = assemble(records.coords, records.occupancy, records.vertex_ptr, records.offsets,
                       records.tri_bits, R, compute_bits=False, transform=transform)
    return mesh


def decode_mesh(data: bytes) -> DMCMesh:
    """Decode and reassemble in one step."""
    d = decode(data)
    d.assembled = reassemble(d)
    return d


def quantized(mesh: DMCMesh) -> DMCMesh:
    """The mesh as it comes back from one encode/decode cycle."""
    return decode_mesh(encode(mesh))


def baseline_size(mesh: TriangleMesh) -> int:
    """Bytes of a plain binary indexed mesh: two uint32 counts, float32 xyz, uint32 indices."""
    return 8 + 12 * mesh.n_vertices + 12 * mesh.n_triangles


def write_baseline(mesh: TriangleMesh, path) -> int:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", mesh.n_vertices, mesh.n_triangles))
        fh.write(np.ascontiguousarray(mesh.positions, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(mesh.triangles, dtype="<u4").tobytes())
    return baseline_size(mesh)
