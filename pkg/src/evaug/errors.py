"""Exception hierarchy.

Everything raised on bad data derives from EvaugError so callers (and the
CLI) can distinguish data problems from programming errors.
"""


class EvaugError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(EvaugError):
    """Malformed on-disk data: stream or frame files that violate their format."""


class ValidationError(EvaugError):
    """Domain invariant violated: bad geometry, polarity, rates, plans, ..."""


class ConfigError(EvaugError):
    """Unreadable or inconsistent run configuration."""
