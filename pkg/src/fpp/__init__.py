"""First-passage percolation on Z^d: ball growth, holes, gadgets and probes."""

__version__ = "0.1.0"

from .errors import (CertificateError, ConfigError, FPPError, PlantingError,  # noqa: E402
                     ResourceLimitError, SnapshotCorruptError, SnapshotError,
                     SnapshotVersionError)
from .growth import Ball, extract_geodesic, grow_to, out_set, passage_time  # noqa: E402
from .topology import HoleReport, detect_holes  # noqa: E402
from .weights import Edge, EdgePatch, WeightDistribution, WeightField  # noqa: E402

__all__ = [
    "Ball", "CertificateError", "ConfigError", "Edge", "EdgePatch", "FPPError",
    "HoleReport", "PlantingError", "ResourceLimitError", "SnapshotCorruptError",
    "SnapshotError", "SnapshotVersionError", "WeightDistribution", "WeightField",
    "__version__", "detect_holes", "extract_geodesic", "grow_to", "out_set", "passage_time",
]
