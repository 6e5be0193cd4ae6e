"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file does not conform to its interchange format (names the offending field)."""


class ValidationError(ValueError):
    """Structurally well-formed input with semantically invalid values."""
