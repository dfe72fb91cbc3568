"""Exception types shared across the package."""


class TsvitError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(TsvitError):
    """Tensor extents are incompatible with the requested operation."""


class ConfigError(TsvitError):
    """A configuration value violates an invariant."""


class DataError(TsvitError):
    """A dataset or label is inconsistent."""


class ContractError(TsvitError):
    """An API contract was violated (e.g. cache/op mismatch)."""


class FileFormatError(TsvitError):
    """Base class for on-disk format problems."""


class BadMagicError(FileFormatError):
    """File does not start with the expected magic bytes."""


class BadVersionError(FileFormatError):
    """File format version is not supported."""


class TruncatedFileError(FileFormatError):
    """File ended before the declared payload was complete."""


class ShapeMismatchError(FileFormatError):
    """Stored array shapes disagree with the declared configuration."""
