"""Shared exception types."""


class GuardError(RuntimeError):
    """An enumeration/DP guard would be exceeded; refuse rather than truncate."""


class AmbiguityError(RuntimeError):
    """Extraction produced an unexpected number of open contours."""
