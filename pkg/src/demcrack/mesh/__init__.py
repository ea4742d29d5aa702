"""Triangle meshes, facet classification, generators and file I/O."""

from .core import (
    BOUNDARY_DIRICHLET,
    BOUNDARY_NEUMANN,
    CRACKED,
    INTERIOR,
    STATUS_NAMES,
    FacetPartition,
    Mesh,
    MeshError,
    axis_predicate,
    build_mesh,
    facets_on_polyline,
)
from .generators import (
    PATTERNS,
    cut_along_polyline,
    dcircle,
    ddiff,
    discretize_circle,
    discretize_segment,
    disk_points_and_cells,
    drectangle,
    generate_structured_strip,
    generate_unstructured,
    rectangle_tags,
)
from .io import MeshParseError, read_gmsh_ascii, read_mesh_dump, write_gmsh22, write_mesh_dump

__all__ = [
    "BOUNDARY_DIRICHLET", "BOUNDARY_NEUMANN", "CRACKED", "INTERIOR", "STATUS_NAMES",
    "FacetPartition", "Mesh", "MeshError", "MeshParseError", "PATTERNS",
    "axis_predicate", "build_mesh", "cut_along_polyline", "dcircle", "ddiff",
    "discretize_circle", "discretize_segment", "disk_points_and_cells", "drectangle",
    "facets_on_polyline", "generate_structured_strip", "generate_unstructured",
    "rectangle_tags", "read_gmsh_ascii", "read_mesh_dump", "write_gmsh22", "write_mesh_dump",
]
