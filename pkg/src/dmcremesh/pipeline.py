"""End-to-end remeshing: normalize, classify corners, extract, optionally encode."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .codec import encode
from .errors import ConfigError
from .extract import DMCMesh, ExtractConfig, extract
from .field import LinfField, Mode
from .mesh import TriangleMesh, check_watertight_manifold, normalize_to_unit_cube
from .parallel import set_threads
from .voxelize import SparseCornerGrid, check_resolution, classify_corners, grid_spacing

DEFAULT_PADDING = 0.1
STAGES = ("Voxelization", "Flood-fill", "SDF", "Extraction", "Compression")


@dataclass
class RemeshConfig:
    resolution: int = 256
    epsilon_h: float = 1.5
    iters: int = 12
    refine: bool = False
    mode: str = "linf"
    threads: int = 0
    seed: int = 0
    padding: float = DEFAULT_PADDING
    placement: str = "qef"
    check_leaks: bool = True

    def validate(self) -> "RemeshConfig":
        check_resolution(self.resolution)
        if not self.epsilon_h > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon_h}")
        if not 0 <= self.padding < 0.5:
            raise ConfigError(f"padding must lie in [0, 0.5), got {self.padding}")
        if self.epsilon >= self.padding:
            raise ConfigError(f"epsilon {self.epsilon:g} must be smaller than the padding {self.padding:g}")
        if not 1 <= self.iters <= 52:
            raise ConfigError(f"bisection iterations must lie in [1, 52], got {self.iters}")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        if self.placement not in ("qef", "centroid"):
            raise ConfigError(f"unknown placement {self.placement!r}")
        try:
            Mode.parse(self.mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    @property
    def h(self) -> float:
        return grid_spacing(self.resolution)

    @property
    def epsilon(self) -> float:
        return self.epsilon_h * self.h


@dataclass
class RemeshResult:
    dmc: DMCMesh
    grid: SparseCornerGrid
    timings: dict = field(default_factory=dict)
    encoded: bytes | None = None

    @property
    def mesh(self) -> TriangleMesh:
        return self.dmc.assembled

    def summary(self) -> dict:
        m = self.mesh
        rep = check_watertight_manifold(m)
        out = {"vertices": m.n_vertices, "faces": m.n_triangles, "records": self.dmc.n_records,
               "edge_manifold": rep.edge_manifold, "closed": rep.closed, "oriented": rep.oriented,
               "euler": rep.euler_characteristic}
        if self.encoded is not None:
            out["encoded_bytes"] = len(self.encoded)
        out["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return out


def remesh_normalized(mesh: TriangleMesh, config: RemeshConfig, transform=None,
                      compress: bool = False) -> RemeshResult:
    """Remesh a mesh already inside [-1, 1]^3."""
    config.validate()
    set_threads(config.threads)
    t = {}
    field_ = LinfField(mesh, config.epsilon, config.mode)
    grid = classify_corners(mesh, field_, config.resolution, check_leaks=config.check_leaks, timings=t)
    t0 = time.perf_counter()
    dmc = extract(grid, field_, ExtractConfig(config.iters, config.refine, config.placement), transform)
    timings = {"Voxelization": t.get("voxelize", 0.0) + t.get("band", 0.0), "Flood-fill": t.get("flood", 0.0),
               "SDF": t.get("sdf", 0.0), "Extraction": time.perf_counter() - t0}
    data = None
    if compress:
        t0 = time.perf_counter()
        data = encode(dmc)
        timings["Compression"] = time.perf_counter() - t0
    return RemeshResult(dmc, grid, timings, data)


def remesh(mesh: TriangleMesh, config: RemeshConfig | None = None, compress: bool = False) -> RemeshResult:
    """Normalize ``mesh`` into the grid domain and remesh it; the transform travels with the result."""
    config = RemeshConfig() if config is None else config
    config.validate()
    normalized, transform = normalize_to_unit_cube(mesh, config.padding)
    return remesh_normalized(normalized, config, transform, compress)
