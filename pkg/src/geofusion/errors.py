"""Exception types shared across the package."""


class GeofusionError(Exception):
    """Base class for all package errors."""


class DimensionError(GeofusionError, ValueError):
    """Array shapes or widths violate an operation's contract."""


class DataError(GeofusionError):
    """Invalid input data: captures, datasets, missing files."""


class FormatError(DataError):
    """A file exists but its contents violate the expected format."""


class EmptyCaptureError(DataError):
    """A depth capture contains no valid pixels."""


class BehindCameraError(GeofusionError, ValueError):
    """Projection requested for a point with non-positive depth."""


class NumericCheckError(GeofusionError):
    """A numeric verification (gradient check, finiteness) failed."""
