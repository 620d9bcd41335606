"""Exception types shared across the package."""


class MaskDetectError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(MaskDetectError, ValueError):
    """Tensor shapes are incompatible with the requested operation."""


class DomainError(MaskDetectError, ValueError):
    """Image pixel values are in the wrong domain (raw vs unit)."""


class CascadeError(MaskDetectError):
    """Base class for cascade-file problems."""


class CascadeParseError(CascadeError, ValueError):
    """Cascade document is malformed or missing a required element."""


class UnsupportedFeatureError(CascadeError, ValueError):
    """Cascade uses a feature kind this detector does not evaluate."""


class DecodeError(MaskDetectError, ValueError):
    """Image file could not be decoded."""


class DatasetLayoutError(MaskDetectError, ValueError):
    """Dataset root does not follow the three-category directory layout."""


class CheckpointError(MaskDetectError):
    """Base class for model-checkpoint problems."""


class CheckpointFormatError(CheckpointError, ValueError):
    """File does not start with the checkpoint magic bytes."""


class CheckpointVersionError(CheckpointError, ValueError):
    """Checkpoint was written by an unsupported format version."""


class CheckpointCorruptionError(CheckpointError, ValueError):
    """Checkpoint header and payload disagree (truncated or mangled file)."""
