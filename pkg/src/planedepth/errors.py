"""Exception types raised across the package."""


class PlaneDepthError(Exception):
    """Base class for all errors raised by planedepth."""


class EmptyInputError(PlaneDepthError, ValueError):
    """An operation received an empty video, region, or sample set."""


class DimensionMismatchError(PlaneDepthError, ValueError):
    """Arrays that must share a shape do not."""


class BehindCameraError(PlaneDepthError, ValueError):
    """A plane evaluates to non-positive depth along a ray."""


class DegenerateGeometryError(PlaneDepthError, ValueError):
    """Rays do not span enough directions to determine a plane."""


class MissingPlaneError(PlaneDepthError, KeyError):
    """A label map references a region with no plane assigned."""


class NotTrainedError(PlaneDepthError, ValueError):
    """A model is used before it was trained."""


class FormatError(PlaneDepthError, ValueError):
    """A serialized file has a malformed header or inconsistent payload."""
