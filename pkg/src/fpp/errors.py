"""Exception types shared across the package."""


class FPPError(Exception):
    pass


class ResourceLimitError(FPPError):
    """Growth would exceed a configured vertex or memory cap."""


class CertificateError(FPPError, ValueError):
    """A good-vertex certificate fails its defining predicates."""


class PlantingError(FPPError, ValueError):
    """A plant request is inconsistent with the ball or with earlier plants."""


class SnapshotError(FPPError):
    pass


class SnapshotVersionError(SnapshotError):
    pass


class SnapshotCorruptError(SnapshotError):
    pass


class ConfigError(FPPError, ValueError):
    pass
