"""Exception types shared across the package."""


class CgsError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(CgsError):
    """Array shapes or image/label-map dimensions disagree."""


class NonPositiveCholDiagonal(CgsError):
    """A Cholesky factor has l11 <= 0 or l22 <= 0."""


class RegionIdOutOfRange(CgsError):
    """A Gaussian carries a region ID outside the label map's range."""


class EmptyMask(CgsError):
    """A metric was asked to average over a mask with no selected pixels."""


class ImageTooSmall(CgsError):
    """Image dimensions cannot support the requested windowed metric."""


class SingleRegion(CgsError):
    """Label map has only one region, so no boundary exists."""


class TooManyRegions(CgsError):
    """Label map contains more distinct regions than supported (255)."""


class UnsupportedFormat(CgsError):
    """File contents are not in an accepted format."""


class BadMagic(CgsError):
    """Model file does not start with the expected magic bytes."""


class TruncatedFile(CgsError):
    """Model file payload does not match its header."""


class BadSpec(CgsError):
    """Chart specification is internally inconsistent."""


class IoFailure(CgsError):
    """A file could not be written or read."""
