"""Sharp-feature-preserving remeshing with L-infinity distance fields and dual marching cubes."""

from .bvh import NearestHit, TriangleBVH, build_bvh, incident_triangles, nearest_point
from .codec import baseline_size, decode, decode_mesh, encode, reassemble
from .errors import *  # noqa: F401,F403
from .extract import DMCMesh, ExtractConfig, bisect_crossing, extract, place_vertex
from .field import LinfField, Mode, l2_distance, linf_distance, occupancy_margin
from .io import load_mesh, save_mesh
from .mesh import (NormalizationTransform, Plane, TriangleMesh, check_watertight_manifold, crease_fraction,
                   dihedral_histogram, normalize_to_unit_cube)
from .metrics import (FidelityReport, SurfaceSample, evaluate_meshes, evaluate_pair, f1_sharp,
                      sample_surface, sharp_edge_sample)
from .pipeline import RemeshConfig, RemeshResult, remesh, remesh_normalized
from .voxelize import SparseCornerGrid, classify_corners, voxelize_active_cells

__version__ = "0.1.0"
